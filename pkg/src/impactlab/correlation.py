"""Cross-segment parameter correlation between buy and sell series, with a
permutation (shuffle) significance test.

The observed statistic fits the chosen model per calendar-month segment
of the filled-buy series and of the filled-sell series, then computes
the Pearson correlation of one parameter across the aligned segments.
Each null replicate permutes the temporal order of both series
independently, cuts them into consecutive blocks with the same count
profile as the original monthly segmentation, re-runs the same
normalize -> bin -> fit analysis per block, and records the resulting
correlation.  Significance is one-sided: the observed correlation must
exceed the upper 5% quantile of the null correlations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDataError, NumericalError, ValidationError
from .fileio import atomic_writer, fmt_bool, fmt_float, parse_bool
from .fitting import FitOptions, FitResult, fit
from .curves import bin_equal_count, normalize_records, segment_monthly
from .ledger import TradeRecord, classify
from .models import ModelKind, param_names

VERDICT_HEADER = ("param", "kind", "observed_rho", "quantile_05", "significant", "n_shuffles", "seed")
NULL_RHOS_HEADER = ("rho",)

_UPPER_TAIL = 0.05
_MAX_ATTEMPT_FACTOR = 5


@dataclass(frozen=True)
class ParamSeriesPair:
    """Aligned per-segment estimates of one parameter for buy vs sell trades."""

    param: str
    fb_values: tuple[float, ...]
    fs_values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.fb_values) != len(self.fs_values):
            raise ValidationError("fb and fs parameter series must have equal length")
        if len(self.fb_values) < 3:
            raise ValidationError("parameter series need at least 3 segments")


@dataclass(frozen=True)
class ShuffleVerdict:
    """Observed correlation against its permutation null distribution."""

    observed_rho: float
    null_rhos: tuple[float, ...]
    quantile_05: float
    significant: bool
    n_shuffles: int
    seed: int


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient.

    Raises ValidationError on length mismatch or fewer than 3 points,
    DegenerateDataError on zero variance in either list.
    """
    if len(xs) != len(ys):
        raise ValidationError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValidationError("pearson needs at least 3 observations")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateDataError("zero variance: correlation undefined")
    return float(dx @ dy) / math.sqrt(sxx * syy)


def _param_index(kind: ModelKind, param: str) -> int:
    names = param_names(kind)
    if param not in names:
        raise ValidationError(f"parameter {param!r} does not belong to model {kind.value} {names}")
    return names.index(param)


def _series_class(records: Sequence[TradeRecord], label: str):
    if not records:
        raise ValidationError(f"{label} trade series is empty")
    trade_class = classify(records[0])
    if any(classify(rec) is not trade_class for rec in records):
        raise ValidationError(f"{label} trade series mixes trade classes")
    return trade_class


def _fit_blocks(blocks: Sequence[Sequence[TradeRecord]], kinds: Sequence[ModelKind],
                m_bins: int, options: FitOptions) -> dict[ModelKind, list[FitResult]]:
    """Fit every requested kind on every block; raises on degenerate blocks."""
    fits: dict[ModelKind, list[FitResult]] = {kind: [] for kind in kinds}
    for block in blocks:
        points = bin_equal_count(normalize_records(block, context="shuffle block"), m_bins)
        for kind in kinds:
            fits[kind].append(fit(kind, points, options))
    return fits


def _observed_segments(records: Sequence[TradeRecord], m_bins: int, label: str):
    """Month-segmented record lists and their count profile, keyed by label."""
    segments = segment_monthly(records)
    usable = {seg.label: list(seg.records) for seg in segments if len(seg.records) >= m_bins}
    if not usable:
        raise ValidationError(f"{label} series has no month with at least M={m_bins} trades")
    return usable


def shuffle_test_all(fb_trades: Sequence[TradeRecord], fs_trades: Sequence[TradeRecord],
                     m_bins: int, n_shuffles: int = 500, seed: int = 0,
                     kinds: Sequence[ModelKind] = (ModelKind.PL, ModelKind.LG),
                     options: FitOptions | None = None) -> dict[tuple[ModelKind, str], ShuffleVerdict]:
    """Shuffle test for every parameter of every requested kind.

    All verdicts share the same permutation stream: one reshuffled
    series pair per replicate is analyzed under every model, exactly as
    re-running "the same analysis" on each shuffled series.  Replicates
    with a non-converged or degenerate fit are discarded and replaced
    with fresh permutations (bounded retries); the null sample size is
    exactly n_shuffles for every verdict.
    """
    if n_shuffles < 1:
        raise ValidationError(f"n_shuffles must be >= 1, got {n_shuffles}")
    options = options or FitOptions()
    fb_class = _series_class(fb_trades, "fb")
    fs_class = _series_class(fs_trades, "fs")
    if fb_class is fs_class:
        raise ValidationError("fb and fs series carry the same trade class")

    fb_by_label = _observed_segments(fb_trades, m_bins, "fb")
    fs_by_label = _observed_segments(fs_trades, m_bins, "fs")
    labels = sorted(set(fb_by_label) & set(fs_by_label))
    if len(labels) < 3:
        raise ValidationError(
            f"need at least 3 aligned months with M={m_bins}+ trades in both series, got {len(labels)}"
        )
    fb_blocks = [fb_by_label[label] for label in labels]
    fs_blocks = [fs_by_label[label] for label in labels]
    fb_profile = [len(b) for b in fb_blocks]
    fs_profile = [len(b) for b in fs_blocks]

    observed_fb = _fit_blocks(fb_blocks, kinds, m_bins, options)
    observed_fs = _fit_blocks(fs_blocks, kinds, m_bins, options)
    for kind in kinds:
        for side_fits in (observed_fb[kind], observed_fs[kind]):
            if not all(f.converged for f in side_fits):
                raise NumericalError(f"observed {kind.value} fit did not converge")

    observed_rho: dict[tuple[ModelKind, str], float] = {}
    series_pairs: dict[tuple[ModelKind, str], ParamSeriesPair] = {}
    for kind in kinds:
        for idx, param in enumerate(param_names(kind)):
            pair = ParamSeriesPair(
                param,
                tuple((f.params.p1, f.params.p2)[idx] for f in observed_fb[kind]),
                tuple((f.params.p1, f.params.p2)[idx] for f in observed_fs[kind]),
            )
            series_pairs[(kind, param)] = pair
            observed_rho[(kind, param)] = pearson(pair.fb_values, pair.fs_values)

    fb_pool = [rec for block in fb_blocks for rec in block]
    fs_pool = [rec for block in fs_blocks for rec in block]
    null_rhos: dict[ModelKind, dict[str, list[float]]] = {
        kind: {param: [] for param in param_names(kind)} for kind in kinds
    }

    max_attempts = _MAX_ATTEMPT_FACTOR * n_shuffles
    attempt = 0
    while any(len(null_rhos[k][param_names(k)[0]]) < n_shuffles for k in kinds):
        if attempt >= max_attempts:
            raise NumericalError(
                f"shuffle test could not assemble {n_shuffles} clean replicates "
                f"within {max_attempts} attempts"
            )
        rng = np.random.default_rng((seed, attempt))
        attempt += 1
        fb_perm = [fb_pool[i] for i in rng.permutation(len(fb_pool))]
        fs_perm = [fs_pool[i] for i in rng.permutation(len(fs_pool))]
        fb_cut = _cut_blocks(fb_perm, fb_profile)
        fs_cut = _cut_blocks(fs_perm, fs_profile)
        pending = [k for k in kinds if len(null_rhos[k][param_names(k)[0]]) < n_shuffles]
        for kind in pending:
            try:
                rep_fb = _fit_blocks(fb_cut, [kind], m_bins, options)[kind]
                rep_fs = _fit_blocks(fs_cut, [kind], m_bins, options)[kind]
                if not all(f.converged for f in rep_fb + rep_fs):
                    continue
                rhos = {}
                for idx, param in enumerate(param_names(kind)):
                    rhos[param] = pearson(
                        [(f.params.p1, f.params.p2)[idx] for f in rep_fb],
                        [(f.params.p1, f.params.p2)[idx] for f in rep_fs],
                    )
            except (DegenerateDataError, NumericalError):
                continue
            for param, rho in rhos.items():
                null_rhos[kind][param].append(rho)

    verdicts: dict[tuple[ModelKind, str], ShuffleVerdict] = {}
    for kind in kinds:
        for param in param_names(kind):
            nulls = tuple(null_rhos[kind][param][:n_shuffles])
            threshold = float(np.quantile(np.asarray(nulls), 1.0 - _UPPER_TAIL))
            rho = observed_rho[(kind, param)]
            verdicts[(kind, param)] = ShuffleVerdict(
                observed_rho=rho,
                null_rhos=nulls,
                quantile_05=threshold,
                significant=rho > threshold,
                n_shuffles=n_shuffles,
                seed=seed,
            )
    return verdicts


def _cut_blocks(records: Sequence[TradeRecord], profile: Sequence[int]):
    blocks = []
    start = 0
    for size in profile:
        blocks.append(records[start:start + size])
        start += size
    return blocks


def shuffle_test(fb_trades: Sequence[TradeRecord], fs_trades: Sequence[TradeRecord],
                 kind: ModelKind, param: str, m_bins: int,
                 n_shuffles: int = 500, seed: int = 0,
                 options: FitOptions | None = None) -> ShuffleVerdict:
    """Shuffle test for a single (model kind, parameter) pair."""
    _param_index(kind, param)
    verdicts = shuffle_test_all(fb_trades, fs_trades, m_bins, n_shuffles, seed,
                                kinds=(kind,), options=options)
    return verdicts[(kind, param)]


def write_verdicts(verdicts: Mapping[tuple[ModelKind, str], ShuffleVerdict], path: str) -> None:
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(VERDICT_HEADER)
        for (kind, param), verdict in verdicts.items():
            writer.writerow([
                param, kind.value,
                fmt_float(verdict.observed_rho), fmt_float(verdict.quantile_05),
                fmt_bool(verdict.significant), str(verdict.n_shuffles), str(verdict.seed),
            ])


def read_verdicts(path: str) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != VERDICT_HEADER:
            raise ValidationError(f"bad verdict header in {path}: {header!r}")
        return [
            {"param": param, "kind": ModelKind.parse(kind), "observed_rho": float(rho),
             "quantile_05": float(q), "significant": parse_bool(sig),
             "n_shuffles": int(n), "seed": int(seed)}
            for param, kind, rho, q, sig, n, seed in reader
        ]


def write_null_rhos(verdict: ShuffleVerdict, path: str) -> None:
    """Null-distribution dump, one correlation per row (histogram-ready)."""
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(NULL_RHOS_HEADER)
        for rho in verdict.null_rhos:
            writer.writerow([fmt_float(rho)])


def read_null_rhos(path: str) -> list[float]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != NULL_RHOS_HEADER:
            raise ValidationError(f"bad null-distribution header in {path}: {header!r}")
        return [float(row[0]) for row in reader]
