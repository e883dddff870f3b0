"""Synthetic order-flow generator with a known ground-truth impact law.

For each (month, side) the generator draws heavy-tailed trade sizes,
applies the configured impact law to the normalized sizes, multiplies
by mean-one lognormal noise, and rescales so the class mean of the
unsigned impact matches the configured level exactly.  Impacts are
encoded into the price pair (price_after = price_before * exp(+/-r)),
prices chain through the interleaved trade sequence, and optional tick
rounding is applied last.

Amplitude calibration.  Downstream normalization divides sizes and
impacts by their own in-class means, so the normalized pairs always
average to 1 in both coordinates.  Data lying exactly on y = law(x)
therefore forces mean(law(x)) = 1 over the population: the amplitude
embedded in a ledger is fixed by the size sample, not by the raw
configured value.  When calibrate_amplitude is set (the default), the
generator rescales the log-spread of each (month, side) size sample
(a power transform, solved by bisection) until the empirical mean of
the law's shape term equals 1/amplitude, which embeds the configured
amplitude exactly.  This is feasible only for amplitudes the concave
laws can reach: a > 1 for the power law and c * log10(1 + d) > 1 for
the logarithmic law; anything else raises.  Partially filled trades
sit outside the law: their sizes come from the upper tail of a fresh
draw and their impacts are a near-constant multiple of the mean level.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import DegenerateDataError, ValidationError
from .ledger import TradeRecord, make_record
from .models import ModelKind

_SIZE_DISTS = ("lognormal", "pareto")
_BETA_MAX = 512.0
_CALIBRATION_TOL = 1e-13


@dataclass(frozen=True)
class GenConfig:
    """Ground-truth law plus market plumbing for one synthetic asset."""

    kind: ModelKind = ModelKind.PL
    p1: float = 1.35              # a (PL) or c (LG)
    p2: float = 0.65              # gamma (PL) or d (LG)
    n_trades: int = 5000          # filled trades per class per segment
    n_segments: int = 12
    size_dist: str = "lognormal"
    size_sigma: float = 1.5       # lognormal log-scale (pre-calibration)
    size_scale: float = 1000.0    # lognormal median size
    size_alpha: float = 2.5       # pareto tail exponent
    size_min: float = 100.0       # pareto minimum size
    noise_sigma: float = 0.0      # mean-one lognormal impact noise
    mean_impact: float = 5e-4     # target class mean of unsigned impact
    base_price: float = 10.0
    tick_size: float = 0.0
    partial_fraction: float = 0.0
    partial_size_mult: float = 4.0
    partial_impact_scale: float = 10.0
    calibrate_amplitude: bool = True
    start_month: str = "2005-01"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.size_dist not in _SIZE_DISTS:
            raise ValidationError(f"size_dist must be one of {_SIZE_DISTS}, got {self.size_dist!r}")
        if self.n_trades < 1 or self.n_segments < 1:
            raise ValidationError("n_trades and n_segments must be >= 1")
        positive = ("p1", "size_sigma", "size_scale", "size_alpha", "size_min",
                    "mean_impact", "base_price", "partial_size_mult", "partial_impact_scale")
        for name in positive:
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")
        if self.p2 < 0.0 or self.noise_sigma < 0.0 or self.tick_size < 0.0:
            raise ValidationError("p2, noise_sigma and tick_size must be non-negative")
        if not 0.0 <= self.partial_fraction <= 1.0:
            raise ValidationError(f"partial_fraction must be in [0, 1], got {self.partial_fraction}")
        try:
            _parse_month(self.start_month)
        except ValueError:
            raise ValidationError(f"start_month must be YYYY-MM, got {self.start_month!r}") from None


def _parse_month(token: str) -> tuple[int, int]:
    year, month = token.split("-")
    start = datetime(int(year), int(month), 1)
    return start.year, start.month


def _month_window(start_month: str, offset: int) -> tuple[datetime, datetime]:
    year, month = _parse_month(start_month)
    total = (year * 12 + (month - 1)) + offset
    y0, m0 = divmod(total, 12)
    y1, m1 = divmod(total + 1, 12)
    return datetime(y0, m0 + 1, 1), datetime(y1, m1 + 1, 1)


def _shape_fn(config: GenConfig):
    if config.kind is ModelKind.PL:
        return lambda x: x ** config.p2
    return lambda x: np.log10(1.0 + config.p2 * x)


def _shape_at_unit(config: GenConfig) -> float:
    return 1.0 if config.kind is ModelKind.PL else float(np.log10(1.0 + config.p2))


def solve_spread_exponent(sizes: np.ndarray, shape, target: float) -> float:
    """Exponent beta such that x = s**beta / mean(s**beta) has mean(shape(x)) == target.

    mean(shape(x)) decreases from shape(1) at beta = 0 toward 0 as the
    spread grows, so a solution exists iff target < shape(1).
    """
    log_s = np.log(sizes)

    def embedded(beta: float) -> float:
        w = np.exp(beta * log_s)
        return float(np.mean(shape(w / w.mean())))

    lo, hi = 0.0, 1.0
    while embedded(hi) > target:
        hi *= 2.0
        if hi > _BETA_MAX:
            raise DegenerateDataError("size spread calibration did not bracket the target amplitude")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if embedded(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 * max(1.0, hi):
            break
    beta = 0.5 * (lo + hi)
    if abs(embedded(beta) - target) > max(_CALIBRATION_TOL, 1e-10 * target):
        raise DegenerateDataError("size spread calibration did not converge")
    return beta


def _draw_sizes(rng: np.random.Generator, config: GenConfig, n: int) -> np.ndarray:
    if config.size_dist == "lognormal":
        return rng.lognormal(mean=np.log(config.size_scale), sigma=config.size_sigma, size=n)
    return config.size_min * (1.0 + rng.pareto(config.size_alpha, size=n))


def _mean_one_noise(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    if sigma == 0.0:
        return np.ones(n)
    return np.exp(sigma * rng.standard_normal(n) - 0.5 * sigma * sigma)


def _filled_batch(rng: np.random.Generator, config: GenConfig):
    """Sizes and unsigned impacts for one (month, side) filled population."""
    shape = _shape_fn(config)
    sizes = _draw_sizes(rng, config, config.n_trades)
    if config.calibrate_amplitude and config.n_trades >= 2:
        target = 1.0 / config.p1
        if _shape_at_unit(config) <= target:
            names = "a > 1" if config.kind is ModelKind.PL else "c * log10(1 + d) > 1"
            raise DegenerateDataError(
                f"configured amplitude is not embeddable after normalization (requires {names})"
            )
        beta = solve_spread_exponent(sizes, shape, target)
        sizes = sizes ** beta
    x = sizes / sizes.mean()
    law = shape(x) * _mean_one_noise(rng, config.noise_sigma, config.n_trades)
    impacts = config.mean_impact * law / law.mean()
    return sizes, impacts


def _partial_batch(rng: np.random.Generator, config: GenConfig):
    """Upper-tail sizes with near-constant impact for one (month, side)."""
    n = int(round(config.partial_fraction * config.n_trades))
    if n == 0:
        return np.empty(0), np.empty(0)
    pool = _draw_sizes(rng, config, max(8 * n, 8))
    sizes = np.sort(pool)[-n:] * config.partial_size_mult
    impacts = config.partial_impact_scale * config.mean_impact * _mean_one_noise(
        rng, config.noise_sigma, n)
    return sizes, impacts


def _round_tick(price: float, tick: float) -> float:
    if tick == 0.0:
        return price
    return round(price / tick) * tick


def generate(config: GenConfig) -> list[TradeRecord]:
    """Generate a full synthetic ledger, deterministic given config.seed.

    Prices chain through the interleaved per-month trade sequence; a
    rounded price that is not positive raises ValidationError.
    """
    root = np.random.SeedSequence(config.seed)
    segment_seeds = root.spawn(config.n_segments)
    records: list[TradeRecord] = []
    price = config.base_price
    for seg_index in range(config.n_segments):
        rng = np.random.default_rng(segment_seeds[seg_index])
        events: list[tuple[str, str, float, float]] = []
        for side in ("buy", "sell"):
            sizes, impacts = _filled_batch(rng, config)
            events.extend(("filled", side, float(w), float(r)) for w, r in zip(sizes, impacts))
            p_sizes, p_impacts = _partial_batch(rng, config)
            events.extend(("partial", side, float(w), float(r)) for w, r in zip(p_sizes, p_impacts))
        order = rng.permutation(len(events))
        start, end = _month_window(config.start_month, seg_index)
        span = (end - start).total_seconds()
        for slot, event_index in enumerate(order):
            fill, side, volume, r = events[event_index]
            timestamp = start + timedelta(seconds=int(slot * span / len(events)))
            price_before = price
            signed = r if side == "buy" else -r
            price_after = _round_tick(price_before * float(np.exp(signed)), config.tick_size)
            if price_after <= 0.0:
                raise ValidationError(
                    f"tick rounding produced a non-positive price ({price_after}) "
                    f"from {price_before} at tick {config.tick_size}"
                )
            records.append(make_record(timestamp, side, fill, price_before, price_after, volume))
            price = price_after
    return records


_GENCONFIG_KEYS = {
    "law": ("kind", ModelKind.parse),
    "a": ("p1", float), "c": ("p1", float), "p1": ("p1", float),
    "gamma": ("p2", float), "d": ("p2", float), "p2": ("p2", float),
    "n_trades": ("n_trades", int),
    "n_segments": ("n_segments", int),
    "size_dist": ("size_dist", str),
    "size_sigma": ("size_sigma", float),
    "size_scale": ("size_scale", float),
    "size_alpha": ("size_alpha", float),
    "size_min": ("size_min", float),
    "noise_sigma": ("noise_sigma", float),
    "mean_impact": ("mean_impact", float),
    "base_price": ("base_price", float),
    "tick": ("tick_size", float), "tick_size": ("tick_size", float),
    "partial_fraction": ("partial_fraction", float),
    "partial_size_mult": ("partial_size_mult", float),
    "partial_impact_scale": ("partial_impact_scale", float),
    "calibrate": ("calibrate_amplitude", None),
    "start_month": ("start_month", str),
    "seed": ("seed", int),
}


def config_from_mapping(entries: dict[str, str]) -> GenConfig:
    """Build a GenConfig from flat key=value strings (the config-file schema)."""
    from .fileio import parse_bool

    kwargs = {}
    for key, raw in entries.items():
        if key not in _GENCONFIG_KEYS:
            raise ValidationError(f"unknown generator config key {key!r}")
        field_name, conv = _GENCONFIG_KEYS[key]
        try:
            kwargs[field_name] = parse_bool(raw) if conv is None else conv(raw)
        except ValueError as exc:
            raise ValidationError(f"bad value for {key!r}: {exc}") from None
    return GenConfig(**kwargs)
