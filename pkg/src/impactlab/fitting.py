"""Damped nonlinear least squares for the impact models.

The solver minimizes the unweighted sum of squared residuals over the
curve points with a Levenberg-style damped normal-equation iteration:
steps solve (J'J + lam * diag(J'J)) step = J'r, a step is accepted only
if it strictly lowers the SSR, and the damping factor shrinks on
acceptance and grows on rejection.  Amplitude parameters (and d for the
logarithmic model) are projected onto a small positive floor so the
search never leaves the models' domain.

Standard errors are heteroskedasticity-consistent (HC1 sandwich):

    V = (J'J)^-1 J' diag(r^2) J (J'J)^-1 * M / (M - 2)

with J the Jacobian at the optimum, r the residuals, and M the number
of curve points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curves import CurvePoint
from .errors import DegenerateDataError, NumericalError, ValidationError
from .fileio import atomic_writer, fmt_bool, fmt_float, fmt_opt_float, parse_opt_float
from .models import ModelKind, ModelParams, evaluate, gradient, param_names

FIT_REPORT_HEADER = ("segment", "class", "kind", "p1", "p1_se", "p2", "p2_se", "r2", "mse", "converged")

_PARAM_FLOOR = 1e-8
_DAMPING_MAX = 1e12
_DAMPING_MIN = 1e-12


@dataclass(frozen=True)
class FitOptions:
    """Solver controls.

    rtol is the relative SSR improvement below which the iteration is
    declared converged.  When the first start fails to converge and
    multi_start is set, a coarse 5x5 log-spaced grid of starting points
    is tried and the best converged result kept.
    """

    max_iterations: int = 200
    rtol: float = 1e-12
    damping_init: float = 1e-3
    damping_grow: float = 10.0
    damping_shrink: float = 0.1
    initial_params: tuple[float, float] | None = None
    multi_start: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        for name in ("rtol", "damping_init", "damping_grow", "damping_shrink"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with uncertainty and goodness-of-fit diagnostics."""

    params: ModelParams
    robust_se: tuple[float, float]
    r_squared: float
    mse: float
    residuals: np.ndarray = field(repr=False)
    iterations: int
    converged: bool


def _default_start(kind: ModelKind) -> tuple[float, float]:
    return (1.0, 0.5) if kind is ModelKind.PL else (1.0, 1.0)


def _start_grid(kind: ModelKind) -> list[tuple[float, float]]:
    p1s = np.logspace(-1.0, 1.0, 5)
    if kind is ModelKind.PL:
        p2s = np.logspace(np.log10(0.1), np.log10(2.0), 5)
    else:
        p2s = np.logspace(-1.0, 1.0, 5)
    return [(float(p1), float(p2)) for p1 in p1s for p2 in p2s]


def _project(kind: ModelKind, p1: float, p2: float) -> tuple[float, float]:
    p1 = max(p1, _PARAM_FLOOR)
    if kind is ModelKind.LG:
        p2 = max(p2, _PARAM_FLOOR)
    return p1, p2


def _model_and_jacobian(kind: ModelKind, p1: float, p2: float, x: np.ndarray):
    params = ModelParams(kind, p1, p2)
    yhat = evaluate(params, x)
    d1, d2 = gradient(params, x)
    return yhat, np.column_stack([d1, d2])


def _damped_descent(kind: ModelKind, x: np.ndarray, y: np.ndarray,
                    start: tuple[float, float], options: FitOptions):
    p1, p2 = _project(kind, *start)
    residuals = y - evaluate(ModelParams(kind, p1, p2), x)
    ssr = float(residuals @ residuals)
    damping = options.damping_init
    iterations = 0
    converged = ssr == 0.0
    while not converged and iterations < options.max_iterations:
        _, jac = _model_and_jacobian(kind, p1, p2, x)
        normal = jac.T @ jac
        grad = jac.T @ residuals
        diag = np.diag(np.maximum(np.diag(normal), np.finfo(float).tiny))
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(normal + damping * diag, grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                q1, q2 = _project(kind, p1 + float(step[0]), p2 + float(step[1]))
                trial = y - evaluate(ModelParams(kind, q1, q2), x)
                trial_ssr = float(trial @ trial)
                if trial_ssr < ssr:
                    improvement = (ssr - trial_ssr) / ssr
                    p1, p2, residuals, ssr = q1, q2, trial, trial_ssr
                    damping = max(damping * options.damping_shrink, _DAMPING_MIN)
                    accepted = True
                    iterations += 1
                    if improvement < options.rtol or ssr == 0.0:
                        converged = True
                    continue
            damping *= options.damping_grow
            if damping > _DAMPING_MAX:
                # no descent direction at maximal damping: numerically stationary
                converged = True
                break
    return (p1, p2), residuals, ssr, iterations, converged


def goodness(points: Sequence[CurvePoint], params: ModelParams) -> tuple[float, float]:
    """(R^2, MSE) of a parameter set against curve points.

    Raises DegenerateDataError when all y_mean are equal (R^2 undefined).
    """
    if len(points) < 2:
        raise ValidationError("goodness needs at least 2 points")
    x = np.array([p.x_mean for p in points])
    y = np.array([p.y_mean for p in points])
    residuals = y - evaluate(params, x)
    ssr = float(residuals @ residuals)
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise DegenerateDataError("all y_mean equal: R^2 undefined")
    return 1.0 - ssr / tss, ssr / len(points)


def robust_se(kind: ModelKind, points: Sequence[CurvePoint], params: ModelParams) -> tuple[float, float]:
    """HC1 sandwich standard errors of (p1, p2) at a fitted optimum.

    Raises NumericalError naming the unidentified parameter direction
    when the Jacobian is rank deficient.
    """
    m = len(points)
    if m < 3:
        raise ValidationError("robust_se needs at least 3 points")
    x = np.array([p.x_mean for p in points])
    y = np.array([p.y_mean for p in points])
    yhat, jac = _model_and_jacobian(kind, params.p1, params.p2, x)
    residuals = y - yhat

    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= s[0] * 1e-13:
        names = param_names(kind)
        weights = ", ".join(f"{w:+.3f}*{n}" for w, n in zip(vt[-1], names))
        raise NumericalError(f"singular normal equations: direction ({weights}) is unidentified")

    bread = np.linalg.inv(jac.T @ jac)
    meat = jac.T @ (jac * (residuals ** 2)[:, None])
    cov = bread @ meat @ bread * (m / (m - 2))
    variances = np.maximum(np.diag(cov), 0.0)
    return float(np.sqrt(variances[0])), float(np.sqrt(variances[1]))


def fit(kind: ModelKind, points: Sequence[CurvePoint], options: FitOptions | None = None) -> FitResult:
    """Fit one model to curve points by damped least squares.

    Non-convergence within max_iterations is reported via
    FitResult.converged, not raised.  A rank-deficient Jacobian at the
    solution raises NumericalError.
    """
    options = options or FitOptions()
    if len(points) < 3:
        raise ValidationError(f"need at least 3 curve points to fit, got {len(points)}")
    x = np.array([p.x_mean for p in points])
    y = np.array([p.y_mean for p in points])
    if np.any(np.diff(x) <= 0.0):
        raise ValidationError("curve x_mean values must be strictly increasing")

    start = options.initial_params or _default_start(kind)
    best = _damped_descent(kind, x, y, start, options)
    if not best[4] and options.multi_start:
        for candidate_start in _start_grid(kind):
            candidate = _damped_descent(kind, x, y, candidate_start, options)
            better_ssr = candidate[2] < best[2]
            if (candidate[4] and not best[4]) or (candidate[4] == best[4] and better_ssr):
                best = candidate

    (p1, p2), residuals, ssr, iterations, converged = best
    params = ModelParams(kind, p1, p2)
    r_squared, mse = goodness(points, params)
    se = robust_se(kind, points, params)
    return FitResult(params, se, r_squared, mse, residuals, iterations, converged)


def write_fit_report(rows: Sequence[tuple[str, str, ModelKind, FitResult | None]], path: str) -> None:
    """Fit report CSV: one row per (segment, class, kind); skipped cells keep
    the row with empty numeric fields and converged=skipped."""
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(FIT_REPORT_HEADER)
        for segment_label, class_label, kind, result in rows:
            if result is None:
                writer.writerow([segment_label, class_label, kind.value, "", "", "", "", "", "", "skipped"])
            else:
                writer.writerow([
                    segment_label, class_label, kind.value,
                    fmt_float(result.params.p1), fmt_float(result.robust_se[0]),
                    fmt_float(result.params.p2), fmt_float(result.robust_se[1]),
                    fmt_float(result.r_squared), fmt_float(result.mse),
                    fmt_bool(result.converged),
                ])


def read_fit_report(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != FIT_REPORT_HEADER:
            raise ValidationError(f"bad fit report header in {path}: {header!r}")
        rows = []
        for segment_label, class_label, kind, p1, p1_se, p2, p2_se, r2, mse, converged in reader:
            rows.append({
                "segment": segment_label,
                "class": class_label,
                "kind": ModelKind.parse(kind),
                "p1": parse_opt_float(p1), "p1_se": parse_opt_float(p1_se),
                "p2": parse_opt_float(p2), "p2_se": parse_opt_float(p2_se),
                "r2": parse_opt_float(r2), "mse": parse_opt_float(mse),
                "converged": None if converged == "skipped" else converged == "true",
            })
        return rows


def result_from_params(kind: ModelKind, p1: float, p2: float, converged: bool = True) -> FitResult:
    """Wrap externally obtained parameter estimates as a FitResult (no refit)."""
    params = ModelParams(kind, p1, p2)
    return FitResult(params, (float("nan"), float("nan")), float("nan"), float("nan"),
                     np.empty(0), 0, converged)
