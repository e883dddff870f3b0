"""The two competing impact-curve models and their analytic gradients.

Both models map a normalized trade size x = w/<w> to a normalized
impact y = r/<r>:

    power law (PL):    y = a * x**gamma
    logarithmic (LG):  y = c * log10(1 + d*x)

Amplitudes a and c must be positive.  gamma is unconstrained at the
model level (the estimator keeps it sensible); d may sit at the 0
boundary, where the LG curve is identically zero, but the estimator
floors it at a small positive value during search.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_LN10 = float(np.log(10.0))


class ModelKind(enum.Enum):
    PL = "pl"
    LG = "lg"

    @classmethod
    def parse(cls, token: str) -> "ModelKind":
        try:
            return cls(token.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown model kind {token!r} (expected 'pl' or 'lg')") from None


def param_names(kind: ModelKind) -> tuple[str, str]:
    """Conventional names of (p1, p2) for a model kind."""
    return ("a", "gamma") if kind is ModelKind.PL else ("c", "d")


@dataclass(frozen=True)
class ModelParams:
    """Parameter pair of one impact model: (a, gamma) for PL, (c, d) for LG."""

    kind: ModelKind
    p1: float
    p2: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.p1) or not np.isfinite(self.p2):
            raise ValidationError(f"non-finite model parameters ({self.p1}, {self.p2})")
        name1, name2 = param_names(self.kind)
        if self.p1 <= 0.0:
            raise ValidationError(f"{name1} must be positive, got {self.p1}")
        if self.kind is ModelKind.LG and self.p2 < 0.0:
            raise ValidationError(f"{name2} must be non-negative, got {self.p2}")


def _check_domain(params: ModelParams, x: np.ndarray) -> None:
    if np.any(x <= 0.0):
        raise ValidationError("normalized size x must be positive")
    if params.kind is ModelKind.LG and np.any(1.0 + params.p2 * x <= 0.0):
        # unreachable while d >= 0 and x > 0, kept as an explicit guard
        raise ValidationError("log argument 1 + d*x must be positive")


def evaluate(params: ModelParams, x):
    """Evaluate the model at x (scalar or array, x > 0)."""
    xa = np.asarray(x, dtype=float)
    _check_domain(params, xa)
    if params.kind is ModelKind.PL:
        out = params.p1 * xa ** params.p2
    else:
        out = params.p1 * np.log10(1.0 + params.p2 * xa)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def gradient(params: ModelParams, x):
    """Partial derivatives (dy/dp1, dy/dp2) at x (scalar or array, x > 0)."""
    xa = np.asarray(x, dtype=float)
    _check_domain(params, xa)
    if params.kind is ModelKind.PL:
        xg = xa ** params.p2
        d1 = xg
        d2 = params.p1 * xg * np.log(xa)
    else:
        u = 1.0 + params.p2 * xa
        d1 = np.log10(u)
        d2 = params.p1 * xa / (u * _LN10)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(d1), float(d2)
    return d1, d2
