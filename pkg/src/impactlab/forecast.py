"""Out-of-sample prediction: mean in-sample parameters, held-out MSE, winner.

Predictive parameters are the arithmetic means of the converged
per-segment estimates.  They are scored on the held-out segment's
curve (normalized by the held-out month's own means) with the mean
squared prediction error, and the model with the lower MSE wins.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import CurvePoint
from .errors import ValidationError
from .fileio import atomic_writer, fmt_float
from .fitting import FitResult
from .models import ModelKind, ModelParams, evaluate

log = logging.getLogger(__name__)

FORECAST_HEADER = ("asset", "class", "M", "model", "p1", "p2", "mse", "winner")
PREDICTION_CURVE_HEADER = ("x", "y_pred_pl", "y_pred_lg", "y_fit_pl", "y_fit_lg", "y_actual")


@dataclass(frozen=True)
class PredictiveParams:
    """Mean of converged per-segment parameter estimates for one model."""

    kind: ModelKind
    p1_mean: float
    p2_mean: float
    n_fits: int

    def as_model_params(self) -> ModelParams:
        return ModelParams(self.kind, self.p1_mean, self.p2_mean)


@dataclass(frozen=True)
class ForecastReport:
    """Held-out accuracy of both models for one (class, M) cell."""

    class_label: str
    m_bins: int
    pl_mse: float
    lg_mse: float
    winner: ModelKind | None  # None on an exact tie
    pl_params: PredictiveParams | None = None
    lg_params: PredictiveParams | None = None


def mean_params(fits: Sequence[FitResult], kind: ModelKind) -> PredictiveParams:
    """Component-wise mean of the converged fits of one kind."""
    matching = [f for f in fits if f.params.kind is kind]
    usable = [f for f in matching if f.converged]
    dropped = len(matching) - len(usable)
    if dropped:
        log.warning("mean_params: excluding %d non-converged %s fit(s)", dropped, kind.value)
    if not usable:
        raise ValidationError(f"no converged {kind.value} fits to average")
    p1 = math.fsum(f.params.p1 for f in usable) / len(usable)
    p2 = math.fsum(f.params.p2 for f in usable) / len(usable)
    return PredictiveParams(kind, p1, p2, len(usable))


def predict_mse(pred: PredictiveParams, points: Sequence[CurvePoint]) -> float:
    """Mean squared prediction error of frozen parameters on held-out points."""
    if not points:
        raise ValidationError("no held-out curve points to score")
    x = np.array([p.x_mean for p in points])
    y = np.array([p.y_mean for p in points])
    residuals = y - evaluate(pred.as_model_params(), x)
    return float(residuals @ residuals) / len(points)


def compare(class_label: str, m_bins: int, pl_mse: float, lg_mse: float,
            pl_params: PredictiveParams | None = None,
            lg_params: PredictiveParams | None = None) -> ForecastReport:
    """Pick the lower-MSE model; exact equality is reported as a tie."""
    if not (math.isfinite(pl_mse) and math.isfinite(lg_mse)):
        raise ValidationError(f"non-finite MSE inputs ({pl_mse}, {lg_mse})")
    if pl_mse < lg_mse:
        winner = ModelKind.PL
    elif lg_mse < pl_mse:
        winner = ModelKind.LG
    else:
        winner = None
    return ForecastReport(class_label, m_bins, pl_mse, lg_mse, winner, pl_params, lg_params)


def write_forecast_report(reports: Sequence[ForecastReport], asset: str, path: str) -> None:
    """One row per (class, M, model), mirroring the out-of-sample comparison table."""
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(FORECAST_HEADER)
        for report in reports:
            winner = "tie" if report.winner is None else report.winner.value
            for kind, params, mse in ((ModelKind.PL, report.pl_params, report.pl_mse),
                                      (ModelKind.LG, report.lg_params, report.lg_mse)):
                if params is None:
                    raise ValidationError("forecast report rows need predictive parameters")
                writer.writerow([
                    asset, report.class_label, str(report.m_bins), kind.value,
                    fmt_float(params.p1_mean), fmt_float(params.p2_mean),
                    fmt_float(mse), winner,
                ])


def read_forecast_report(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != FORECAST_HEADER:
            raise ValidationError(f"bad forecast header in {path}: {header!r}")
        return [
            {"asset": asset, "class": cls, "M": int(m), "model": ModelKind.parse(model),
             "p1": float(p1), "p2": float(p2), "mse": float(mse),
             "winner": None if winner == "tie" else ModelKind.parse(winner)}
            for asset, cls, m, model, p1, p2, mse, winner in reader
        ]


def write_prediction_curve(points: Sequence[CurvePoint],
                           pl_pred: ModelParams, lg_pred: ModelParams,
                           pl_fit: ModelParams, lg_fit: ModelParams,
                           path: str) -> None:
    """Plot-ready held-out curve: actual bin means vs predicted and refitted models."""
    x = np.array([p.x_mean for p in points])
    columns = [
        x,
        evaluate(pl_pred, x),
        evaluate(lg_pred, x),
        evaluate(pl_fit, x),
        evaluate(lg_fit, x),
        np.array([p.y_mean for p in points]),
    ]
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(PREDICTION_CURVE_HEADER)
        for row in zip(*columns):
            writer.writerow([fmt_float(v) for v in row])


def read_prediction_curve(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != PREDICTION_CURVE_HEADER:
            raise ValidationError(f"bad prediction curve header in {path}: {header!r}")
        return [dict(zip(PREDICTION_CURVE_HEADER, map(float, row))) for row in reader]
