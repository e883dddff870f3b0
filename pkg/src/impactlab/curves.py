"""Monthly segmentation, per-class normalization, and equal-count binning.

A ledger is cut into calendar-month segments.  Within one (segment,
class) population, trade sizes and unsigned impacts are divided by
their own means, giving pairs (x, y) whose means are exactly 1.  The
pairs are then split into M groups of (near-)equal count by ascending
size, and each group is collapsed to the mean point of its members.
These curve points are what the models are fitted to.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, NumericalError, ValidationError
from .fileio import atomic_writer, fmt_float
from .ledger import TradeClass, TradeRecord, classify, impact

CURVE_HEADER = ("bin", "x_mean", "y_mean", "n")

# invariant tolerance for normalization and bin bookkeeping checks,
# asserted on every pipeline pass
_CHECK_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """All trades of one calendar month, in temporal order."""

    label: str  # "YYYY-MM"
    records: tuple[TradeRecord, ...]


@dataclass(frozen=True, slots=True)
class NormalizedPair:
    """One trade in curve coordinates: x = size/mean size, y = impact/mean impact."""

    x: float
    y: float


@dataclass(frozen=True)
class CurvePoint:
    """Mean coordinates of one size bin and its member count."""

    x_mean: float
    y_mean: float
    n: int


def segment_monthly(records: Sequence[TradeRecord]) -> list[Segment]:
    """Split a time-sorted ledger into calendar-month segments.

    Raises ValidationError identifying the first timestamp inversion if
    the ledger is not sorted.  An empty ledger gives an empty list.
    """
    for i in range(1, len(records)):
        if records[i].timestamp < records[i - 1].timestamp:
            raise ValidationError(
                f"ledger not sorted by timestamp: record {i + 1} "
                f"({records[i].timestamp.isoformat()}) precedes record {i} "
                f"({records[i - 1].timestamp.isoformat()})"
            )
    segments: list[Segment] = []
    bucket: list[TradeRecord] = []
    current: tuple[int, int] | None = None
    for rec in records:
        key = (rec.timestamp.year, rec.timestamp.month)
        if key != current:
            if bucket:
                segments.append(Segment(f"{current[0]:04d}-{current[1]:02d}", tuple(bucket)))
            bucket = []
            current = key
        bucket.append(rec)
    if bucket:
        segments.append(Segment(f"{current[0]:04d}-{current[1]:02d}", tuple(bucket)))
    return segments


def normalize_records(records: Sequence[TradeRecord], context: str = "population") -> list[NormalizedPair]:
    """Normalize a single-class record list by its own mean size and mean impact."""
    if not records:
        raise ValidationError(f"no records to normalize in {context}")
    volumes = np.array([rec.volume for rec in records], dtype=float)
    impacts = np.array([impact(rec)[1] for rec in records], dtype=float)
    mean_w = volumes.mean()
    mean_r = impacts.mean()
    if mean_r <= 0.0:
        raise DegenerateDataError(f"degenerate {context}: all impacts are zero")
    x = volumes / mean_w
    y = impacts / mean_r
    if abs(x.mean() - 1.0) > _CHECK_TOL or abs(y.mean() - 1.0) > _CHECK_TOL:
        raise NumericalError(f"normalization invariant violated in {context}")
    return [NormalizedPair(float(a), float(b)) for a, b in zip(x, y)]


def normalize(segment: Segment, trade_class: TradeClass) -> list[NormalizedPair]:
    """Normalized (x, y) pairs for one class within one segment, in temporal order."""
    selected = [rec for rec in segment.records if classify(rec) is trade_class]
    if not selected:
        raise ValidationError(f"segment {segment.label} has no {trade_class.name} trades")
    return normalize_records(selected, context=f"segment {segment.label} class {trade_class.name}")


def bin_equal_count(pairs: Sequence[NormalizedPair], m_bins: int) -> list[CurvePoint]:
    """Split pairs into m_bins groups of near-equal count by ascending x.

    Bin sizes differ by at most one; the first len(pairs) % m_bins bins
    take the extra element.  Ties in x keep their original (temporal)
    order: the sort is stable.
    """
    n = len(pairs)
    if m_bins < 1:
        raise ValidationError(f"m_bins must be >= 1, got {m_bins}")
    if n < m_bins:
        raise ValidationError(f"cannot form M={m_bins} bins from {n} pairs")
    x = np.fromiter((p.x for p in pairs), dtype=float, count=n)
    y = np.fromiter((p.y for p in pairs), dtype=float, count=n)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]

    sizes = np.full(m_bins, n // m_bins, dtype=int)
    sizes[: n % m_bins] += 1
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    x_means = np.add.reduceat(xs, starts) / sizes
    y_means = np.add.reduceat(ys, starts) / sizes
    points = [
        CurvePoint(float(xm), float(ym), int(sz))
        for xm, ym, sz in zip(x_means, y_means, sizes)
    ]

    # partition and weighted-mean bookkeeping, checked on every pass
    if sum(p.n for p in points) != n or max(p.n for p in points) - min(p.n for p in points) > 1:
        raise NumericalError("bin count invariant violated")
    wx = sum(p.x_mean * p.n for p in points) / n
    wy = sum(p.y_mean * p.n for p in points) / n
    scale_x = max(abs(x.mean()), 1.0)
    scale_y = max(abs(y.mean()), 1.0)
    if abs(wx - x.mean()) > _CHECK_TOL * scale_x or abs(wy - y.mean()) > _CHECK_TOL * scale_y:
        raise NumericalError("weighted bin means do not reproduce population means")
    return points


def build_curve(segment: Segment, trade_class: TradeClass, m_bins: int) -> list[CurvePoint]:
    """normalize + bin_equal_count for one (segment, class)."""
    return bin_equal_count(normalize(segment, trade_class), m_bins)


def curve_filename(trade_class: TradeClass, segment_label: str, m_bins: int) -> str:
    return f"curves_{trade_class.name.lower()}_{segment_label}_M{m_bins}.csv"


def write_curve(points: Sequence[CurvePoint], path: str) -> None:
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(CURVE_HEADER)
        for i, point in enumerate(points, start=1):
            writer.writerow([str(i), fmt_float(point.x_mean), fmt_float(point.y_mean), str(point.n)])


def read_curve(path: str) -> list[CurvePoint]:
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != CURVE_HEADER:
            raise ValidationError(f"bad curve header in {path}: {header!r}")
        return [CurvePoint(float(xm), float(ym), int(n)) for _idx, xm, ym, n in reader]
