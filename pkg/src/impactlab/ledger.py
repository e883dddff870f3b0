"""Trade ledger parsing, classification, per-trade impact, and summaries.

Ledger CSV format (one trade per row, rows in temporal order):

    timestamp,side,fill,price_before,price_after,volume,currency_volume

with side in {buy, sell}, fill in {filled, partial}, ISO-8601
timestamps, and an optional currency_volume (derived as
volume * price_after when empty).  Prices here are whatever convention
the data preparer chose (trade prices or mid-quotes); the toolkit does
not re-derive them.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from datetime import datetime
from typing import IO, Iterable, Sequence

from .errors import ValidationError
from .fileio import atomic_writer, fmt_float, fmt_opt_float

LEDGER_HEADER = ("timestamp", "side", "fill", "price_before", "price_after", "volume", "currency_volume")
SIDES = ("buy", "sell")
FILLS = ("filled", "partial")

SUMMARY_HEADER = ("class", "count", "mean_impact_bps", "mean_volume", "mean_currency_volume")


class TradeClass(enum.Enum):
    """Direction x aggressiveness taxonomy of marketable-order trades."""

    FB = ("buy", "filled")
    FS = ("sell", "filled")
    PB = ("buy", "partial")
    PS = ("sell", "partial")

    @classmethod
    def parse(cls, token: str) -> "TradeClass":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown trade class {token!r}") from None


@dataclass(frozen=True, slots=True)
class TradeRecord:
    """One matched-order trade event."""

    timestamp: datetime
    side: str
    fill: str
    price_before: float
    price_after: float
    volume: float
    currency_volume: float

    def __post_init__(self) -> None:
        if self.side not in SIDES:
            raise ValidationError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.fill not in FILLS:
            raise ValidationError(f"fill must be one of {FILLS}, got {self.fill!r}")
        if not self.price_before > 0.0:
            raise ValidationError(f"price_before must be positive, got {self.price_before}")
        if not self.price_after > 0.0:
            raise ValidationError(f"price_after must be positive, got {self.price_after}")
        if not self.volume > 0.0:
            raise ValidationError(f"volume must be positive, got {self.volume}")
        if self.currency_volume < 0.0:
            raise ValidationError(f"currency_volume must be non-negative, got {self.currency_volume}")


def make_record(timestamp, side, fill, price_before, price_after, volume, currency_volume=None) -> TradeRecord:
    """Build a TradeRecord, deriving currency_volume = volume * price_after when absent."""
    if currency_volume is None:
        currency_volume = float(volume) * float(price_after)
    return TradeRecord(timestamp, side, fill, float(price_before), float(price_after),
                       float(volume), float(currency_volume))


def classify(record: TradeRecord) -> TradeClass:
    """Classify a trade by (side, fill) alone."""
    return TradeClass((record.side, record.fill))


def impact(record: TradeRecord) -> tuple[float, float]:
    """Per-trade impact: (signed log return, unsigned magnitude).

    signed = ln(price_after) - ln(price_before); the unsigned magnitude
    is the regressand of the impact curves, the signed value feeds the
    summary statistics.
    """
    signed = math.log(record.price_after) - math.log(record.price_before)
    return signed, abs(signed)


def parse_ledger(source: IO[str] | Iterable[str]) -> list[TradeRecord]:
    """Parse a ledger CSV stream into records, in file order.

    Raises ValidationError naming the offending 1-based file line on any
    malformed row (the header is line 1).
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty ledger file: missing header") from None
    if tuple(h.strip() for h in header) != LEDGER_HEADER:
        raise ValidationError(f"line 1: bad header {header!r}, expected {','.join(LEDGER_HEADER)}")

    records: list[TradeRecord] = []
    for row in reader:
        line = reader.line_num
        if len(row) != len(LEDGER_HEADER):
            raise ValidationError(f"line {line}: expected {len(LEDGER_HEADER)} columns, got {len(row)}")
        ts_raw, side, fill, pb_raw, pa_raw, vol_raw, cv_raw = (field.strip() for field in row)
        try:
            timestamp = datetime.fromisoformat(ts_raw)
        except ValueError:
            raise ValidationError(f"line {line}: bad timestamp {ts_raw!r}") from None
        if side not in SIDES:
            raise ValidationError(f"line {line}: unknown side token {side!r}")
        if fill not in FILLS:
            raise ValidationError(f"line {line}: unknown fill token {fill!r}")
        try:
            price_before = float(pb_raw)
            price_after = float(pa_raw)
            volume = float(vol_raw)
            currency_volume = float(cv_raw) if cv_raw != "" else None
        except ValueError as exc:
            raise ValidationError(f"line {line}: unparsable number ({exc})") from None
        try:
            records.append(make_record(timestamp, side, fill, price_before, price_after,
                                       volume, currency_volume))
        except ValidationError as exc:
            raise ValidationError(f"line {line}: {exc}") from None
    return records


def read_ledger(path: str) -> list[TradeRecord]:
    with open(path, encoding="utf-8", newline="") as handle:
        return parse_ledger(handle)


def write_ledger(records: Sequence[TradeRecord], path: str) -> None:
    """Emit records in the ledger CSV format (inverse of parse_ledger)."""
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(LEDGER_HEADER)
        for rec in records:
            writer.writerow([
                rec.timestamp.isoformat(),
                rec.side,
                rec.fill,
                fmt_float(rec.price_before),
                fmt_float(rec.price_after),
                fmt_float(rec.volume),
                fmt_float(rec.currency_volume),
            ])


@dataclass(frozen=True)
class SummaryRow:
    """Per-class summary: count, mean signed impact (bps), mean volumes.

    Means are None for classes with no trades.
    """

    trade_class: TradeClass
    count: int
    mean_signed_impact_bps: float | None
    mean_volume: float | None
    mean_currency_volume: float | None


def summarize(records: Sequence[TradeRecord]) -> list[SummaryRow]:
    """Summary statistics per trade class, in FB, FS, PB, PS order."""
    if not records:
        raise ValidationError("cannot summarize an empty ledger")
    buckets: dict[TradeClass, list[TradeRecord]] = {tc: [] for tc in TradeClass}
    for rec in records:
        buckets[classify(rec)].append(rec)
    rows = []
    for tc in TradeClass:
        group = buckets[tc]
        if not group:
            rows.append(SummaryRow(tc, 0, None, None, None))
            continue
        n = len(group)
        mean_signed = math.fsum(impact(rec)[0] for rec in group) / n
        mean_volume = math.fsum(rec.volume for rec in group) / n
        mean_currency = math.fsum(rec.currency_volume for rec in group) / n
        rows.append(SummaryRow(tc, n, mean_signed * 1e4, mean_volume, mean_currency))
    return rows


def write_summary(rows: Sequence[SummaryRow], path: str) -> None:
    with atomic_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            writer.writerow([
                row.trade_class.name,
                str(row.count),
                fmt_opt_float(row.mean_signed_impact_bps),
                fmt_opt_float(row.mean_volume),
                fmt_opt_float(row.mean_currency_volume),
            ])


def read_summary(path: str) -> list[SummaryRow]:
    from .fileio import parse_opt_float

    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != SUMMARY_HEADER:
            raise ValidationError(f"bad summary header in {path}: {header!r}")
        return [
            SummaryRow(TradeClass.parse(cls), int(count), parse_opt_float(pi),
                       parse_opt_float(vol), parse_opt_float(cv))
            for cls, count, pi, vol, cv in reader
        ]


def format_summary_table(rows: Sequence[SummaryRow], title: str = "Summary statistics of trades") -> str:
    """Human-readable fixed-width rendering of the per-class summary."""
    lines = [title, f"{'Group':<6}{'Number':>10}{'PI(bps)':>12}{'Volume':>14}{'CcyVolume':>14}"]
    for row in rows:
        if row.count == 0:
            lines.append(f"{row.trade_class.name:<6}{row.count:>10}{'-':>12}{'-':>14}{'-':>14}")
        else:
            lines.append(
                f"{row.trade_class.name:<6}{row.count:>10}"
                f"{row.mean_signed_impact_bps:>12.4f}"
                f"{row.mean_volume:>14.1f}{row.mean_currency_volume:>14.1f}"
            )
    return "\n".join(lines) + "\n"
