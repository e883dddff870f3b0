"""Immediate price impact of marketable orders: estimation and comparison
of the power-law and logarithmic impact models on order-flow ledgers,
with a synthetic generator for oracle-backed validation.
"""

from .correlation import (
    ParamSeriesPair,
    ShuffleVerdict,
    pearson,
    shuffle_test,
    shuffle_test_all,
)
from .curves import (
    CurvePoint,
    NormalizedPair,
    Segment,
    bin_equal_count,
    build_curve,
    normalize,
    segment_monthly,
)
from .errors import DegenerateDataError, NumericalError, ValidationError
from .fitting import FitOptions, FitResult, fit, goodness, result_from_params, robust_se
from .forecast import ForecastReport, PredictiveParams, compare, mean_params, predict_mse
from .ledger import (
    SummaryRow,
    TradeClass,
    TradeRecord,
    classify,
    impact,
    make_record,
    parse_ledger,
    read_ledger,
    summarize,
    write_ledger,
)
from .models import ModelKind, ModelParams, evaluate, gradient, param_names
from .synth import GenConfig, generate

__version__ = "0.1.0"

__all__ = [
    "CurvePoint",
    "DegenerateDataError",
    "FitOptions",
    "FitResult",
    "ForecastReport",
    "GenConfig",
    "ModelKind",
    "ModelParams",
    "NormalizedPair",
    "NumericalError",
    "ParamSeriesPair",
    "PredictiveParams",
    "Segment",
    "ShuffleVerdict",
    "SummaryRow",
    "TradeClass",
    "TradeRecord",
    "ValidationError",
    "bin_equal_count",
    "build_curve",
    "classify",
    "compare",
    "evaluate",
    "fit",
    "generate",
    "goodness",
    "gradient",
    "impact",
    "make_record",
    "mean_params",
    "normalize",
    "param_names",
    "parse_ledger",
    "pearson",
    "predict_mse",
    "read_ledger",
    "result_from_params",
    "robust_se",
    "segment_monthly",
    "shuffle_test",
    "shuffle_test_all",
    "summarize",
    "write_ledger",
]
