"""Grid outage signals: reliability-statistic sampling or a static series.

Days are flagged independently with probability ``saifi / 365`` (capped at 1);
a flagged day gets one event with a uniform start step and an exponential
duration with mean ``caidi`` hours, rounded up to whole steps.  Events may run
past midnight, are truncated at the horizon end, and overlapping events merge.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ReliabilityParams:
    """Average interruptions per year (saifi) and hours per interruption (caidi)."""

    saifi_events_per_year: float = 1.5
    caidi_hours: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.saifi_events_per_year < 0:
            raise ValueError("saifi_events_per_year must be >= 0")
        if self.caidi_hours <= 0:
            raise ValueError("caidi_hours must be positive")

    @property
    def daily_probability(self) -> float:
        return min(1.0, self.saifi_events_per_year / 365.0)


@dataclass(frozen=True)
class OutageSignal:
    active: np.ndarray  # bool, one flag per step
    steps_per_day: int
    source: str = "stochastic"

    def __post_init__(self) -> None:
        arr = np.asarray(self.active, dtype=bool)
        object.__setattr__(self, "active", arr)
        if arr.ndim != 1:
            raise ValueError("outage signal must be 1-D")
        if self.steps_per_day <= 0:
            raise ValueError("steps_per_day must be positive")

    def __len__(self) -> int:
        return int(self.active.size)

    def events(self) -> list[tuple[int, int]]:
        """Contiguous outage runs as (start_step, n_steps) pairs."""
        flags = np.concatenate(([False], self.active, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(flags))
        starts, stops = edges[0::2], edges[1::2]
        return [(int(a), int(b - a)) for a, b in zip(starts, stops)]


def generate(params: ReliabilityParams, n_days: int, steps_per_day: int) -> OutageSignal:
    """Sample an outage signal; deterministic for a given seed.

    Draw order is fixed: one uniform per day decides the flags, then each
    flagged day in order draws its start offset and duration.
    """
    if n_days <= 0 or steps_per_day <= 0:
        raise ValueError("n_days and steps_per_day must be positive")
    rng = np.random.default_rng(params.seed)
    n_steps = n_days * steps_per_day
    hours_per_step = 24.0 / steps_per_day
    active = np.zeros(n_steps, dtype=bool)
    flagged = np.flatnonzero(rng.random(n_days) < params.daily_probability)
    for day in flagged:
        start = int(day) * steps_per_day + int(rng.integers(steps_per_day))
        duration_hours = float(rng.exponential(params.caidi_hours))
        duration_steps = max(1, math.ceil(duration_hours / hours_per_step))
        active[start : start + duration_steps] = True  # truncates at horizon end
    return OutageSignal(active=active, steps_per_day=steps_per_day, source="stochastic")


def from_series(active: np.ndarray, steps_per_day: int) -> OutageSignal:
    """Wrap a pre-computed boolean series verbatim."""
    return OutageSignal(
        active=np.asarray(active, dtype=bool), steps_per_day=steps_per_day, source="static"
    )


def load_signal(path: str | Path, steps_per_day: int) -> OutageSignal:
    """Read a one-column CSV (``outage`` of 0/1) into a static signal."""
    path = Path(path)
    flags: list[bool] = []
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "outage" not in reader.fieldnames:
            raise ValueError(f"{path}: expected an 'outage' column")
        for row_index, row in enumerate(reader, start=1):
            cell = row["outage"].strip()
            if cell not in ("0", "1"):
                raise ValueError(f"{path}: row {row_index}: outage must be 0 or 1, got {cell!r}")
            flags.append(cell == "1")
    if not flags:
        raise ValueError(f"{path}: no data rows")
    return from_series(np.asarray(flags, dtype=bool), steps_per_day)


def save_signal(signal: OutageSignal, path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["outage"])
        for flag in signal.active:
            writer.writerow(["1" if flag else "0"])


def ceiled_exponential_mean(scale_hours: float, hours_per_step: float = 1.0) -> float:
    """Mean of ceil(Exp(scale)/step) in steps, via direct series summation.

    Independent check for the sampled event durations: P(ceil = k) is the
    probability mass of the exponential on ((k-1)*step, k*step].
    """
    if scale_hours <= 0 or hours_per_step <= 0:
        raise ValueError("scale and step must be positive")
    total = 0.0
    k = 1
    while True:
        p = math.exp(-(k - 1) * hours_per_step / scale_hours) - math.exp(
            -k * hours_per_step / scale_hours
        )
        total += k * p
        if k * p < 1e-15 and k > scale_hours / hours_per_step:
            return total
        k += 1
