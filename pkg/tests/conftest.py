"""Shared fixtures and ledger-crafting helpers."""

from __future__ import annotations

import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from impactlab import TradeRecord, make_record


def record(ts="2005-08-22T09:30:01", side="buy", fill="filled",
           price_before=10.0, price_after=10.01, volume=500.0,
           currency_volume=None) -> TradeRecord:
    return make_record(datetime.fromisoformat(ts), side, fill,
                       price_before, price_after, volume, currency_volume)


def record_with_impact(ts, side, fill, volume, unsigned_impact, base_price=10.0) -> TradeRecord:
    """Record whose unsigned log impact is (up to float encoding) the given value."""
    signed = unsigned_impact if side == "buy" else -unsigned_impact
    return make_record(datetime.fromisoformat(ts), side, fill,
                       base_price, base_price * math.exp(signed), volume)


def month_clock(label: str):
    """Yields increasing timestamps inside one YYYY-MM month."""
    year, month = (int(t) for t in label.split("-"))
    start = datetime(year, month, 1, 9, 30, 0)
    step = timedelta(seconds=37)
    tick = 0
    while True:
        yield start + tick * step
        tick += 1


def atom_month(label: str, atoms, gamma: float, copies: int = 2,
               base_impact: float = 5e-4, classes=("buy", "sell")):
    """One month of trades whose sizes take exactly len(atoms) distinct values.

    Every trade's unsigned impact follows a pure power law of its
    normalized size, so equal-count binning with M = len(atoms) lands
    each bin exactly on one atom and the binned curve lies exactly on
    the law.
    """
    atoms = np.asarray(atoms, dtype=float)
    clock = month_clock(label)
    records = []
    for side in classes:
        sizes = np.repeat(atoms, copies)
        x = sizes / sizes.mean()
        impacts = base_impact * x ** gamma
        for volume, r in zip(sizes, impacts):
            records.append(record_with_impact(next(clock).isoformat(), side, "filled",
                                              float(volume), float(r)))
    return records


def atom_ledger(n_months: int, atoms, gamma: float, copies: int = 2,
                start=(2005, 8), gamma_by_month=None):
    records = []
    year, month = start
    for i in range(n_months):
        label = f"{year:04d}-{month:02d}"
        g = gamma if gamma_by_month is None else gamma_by_month[i]
        records.extend(atom_month(label, atoms, g, copies=copies))
        month += 1
        if month == 13:
            year, month = year + 1, 1
    return records


ATOMS_12 = np.geomspace(0.05, 20.0, 12)


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return out
