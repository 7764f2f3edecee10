"""KPI formulas, per-step reward formulations, and baseline comparison.

Cost, emissions, and consumption integrate grid imports only (negative net
electricity is export and earns nothing); discomfort integrates the absolute
setpoint deviation; the peak KPI averages the daily maxima of district demand.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .environment import EpisodeTrace

KPI_NAMES = ("cost", "emissions", "discomfort", "consumption", "avg_daily_peak", "unserved")
REWARD_KINDS = ("cost", "emissions", "discomfort_consumption", "avg_daily_peak")
REPORT_SCHEMA = "gridbench-kpis-1"


@dataclass(frozen=True)
class RewardSpec:
    kind: str
    m: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")


def reward(spec: RewardSpec, state: Mapping[str, float]) -> float:
    """Reward for one step from named state symbols; missing symbols raise.

    cost: -max(e, 0) * rate
    emissions: -max(e, 0) * carbon
    discomfort_consumption: -m * |T - T_spt| below setpoint, -|T - T_spt| above
    avg_daily_peak: -max(P, 0) where P is district demand in kW
    """

    def need(symbol: str) -> float:
        if symbol not in state:
            raise ValueError(f"reward {spec.kind!r} needs state symbol {symbol!r}")
        return float(state[symbol])

    if spec.kind == "cost":
        return -max(need("e"), 0.0) * need("rate")
    if spec.kind == "emissions":
        return -max(need("e"), 0.0) * need("carbon")
    if spec.kind == "discomfort_consumption":
        delta = abs(need("indoor_temp") - need("setpoint"))
        if need("indoor_temp") < need("setpoint"):
            return -spec.m * delta
        return -delta
    return -max(need("district_demand_kw"), 0.0)


def kpi(
    objective: str,
    trace: "EpisodeTrace",
    range_: tuple[int, int] | None = None,
    building: str | None = None,
) -> float:
    """One KPI over ``range_`` (relative to the trace; default: whole trace).

    Building-scoped KPIs aggregate across all buildings when ``building`` is
    None.  ``avg_daily_peak`` is district-level and requires whole days.
    """
    lo, hi = range_ if range_ is not None else (0, trace.n_steps)
    if not 0 <= lo < hi <= trace.n_steps:
        raise ValueError(f"range {range_} outside trace of {trace.n_steps} steps")
    names = [building] if building is not None else list(trace.buildings)
    for name in names:
        if name not in trace.buildings:
            raise ValueError(f"unknown building {name!r}")

    if objective == "avg_daily_peak":
        if building is not None:
            raise ValueError("avg_daily_peak is district-level")
        n = hi - lo
        if n % trace.steps_per_day != 0:
            raise ValueError("avg_daily_peak needs a whole number of days")
        demand = trace.district_demand_kw()[lo:hi]
        daily_max = demand.reshape(n // trace.steps_per_day, trace.steps_per_day).max(axis=1)
        return float(daily_max.sum() * trace.steps_per_day / n)

    total = 0.0
    for name in names:
        b = trace.buildings[name]
        e = b.e_kwh[lo:hi]
        if objective == "cost":
            total += float(np.sum(np.maximum(e, 0.0) * trace.rate[lo:hi]))
            total += trace.fixed_charge_per_step * (hi - lo)
        elif objective == "emissions":
            total += float(np.sum(np.maximum(e, 0.0) * trace.carbon[lo:hi]))
        elif objective == "consumption":
            total += float(np.sum(np.maximum(e, 0.0)))
        elif objective == "discomfort":
            total += float(np.sum(np.abs(b.indoor_c[lo:hi] - b.setpoint_c[lo:hi])))
        elif objective == "unserved":
            total += float(np.sum(b.unserved_kwh[lo:hi]))
        else:
            raise ValueError(f"unknown KPI {objective!r}")
    return total


@dataclass
class KpiReport:
    """All KPIs of one run, with optional percent deltas against baselines."""

    config_id: str
    seed: int
    range_: tuple[int, int]
    buildings: dict[str, dict[str, float]]
    district: dict[str, float]
    baselines: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "config": self.config_id,
            "seed": self.seed,
            "range": list(self.range_),
            "buildings": self.buildings,
            "district": self.district,
            "baselines": self.baselines,
        }

    def to_json(self) -> str:
        # sort_keys + fixed separators keep reruns byte-identical
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"config {self.config_id}  seed {self.seed}  steps {self.range_[0]}..{self.range_[1]}"]
        header = f"{'':14s}" + "".join(f"{k:>16s}" for k in KPI_NAMES)
        lines.append(header)
        for name, values in self.buildings.items():
            row = f"{name:14s}"
            for k in KPI_NAMES:
                row += f"{values[k]:16.6f}" if k in values else f"{'-':>16s}"
            lines.append(row)
        row = f"{'district':14s}"
        for k in KPI_NAMES:
            row += f"{self.district[k]:16.6f}" if k in self.district else f"{'-':>16s}"
        lines.append(row)
        for base_id, deltas in self.baselines.items():
            lines.append(f"percent change vs {base_id}:")
            for scope, values in deltas.items():
                row = f"  {scope:12s}"
                for k in KPI_NAMES:
                    if k in values:
                        row += f"{'null':>16s}" if values[k] is None else f"{values[k]:16.3f}"
                    else:
                        row += f"{'-':>16s}"
                lines.append(row)
        return "\n".join(lines) + "\n"


def report_from_trace(trace: "EpisodeTrace", config_id: str, seed: int) -> KpiReport:
    buildings = {
        name: {
            "cost": kpi("cost", trace, building=name),
            "emissions": kpi("emissions", trace, building=name),
            "discomfort": kpi("discomfort", trace, building=name),
            "consumption": kpi("consumption", trace, building=name),
            "unserved": kpi("unserved", trace, building=name),
        }
        for name in trace.buildings
    }
    district = {
        "cost": kpi("cost", trace),
        "emissions": kpi("emissions", trace),
        "discomfort": kpi("discomfort", trace),
        "consumption": kpi("consumption", trace),
        "avg_daily_peak": kpi("avg_daily_peak", trace),
        "unserved": kpi("unserved", trace),
    }
    return KpiReport(
        config_id=config_id,
        seed=seed,
        range_=trace.range_,
        buildings=buildings,
        district=district,
    )


def percent_delta(value: float, base: float) -> float | None:
    """Percent change vs a baseline; None when the baseline is zero."""
    if base == 0.0:
        return None
    return (value - base) / base * 100.0


def compare(report: KpiReport, baseline: KpiReport) -> KpiReport:
    """Attach percent deltas vs ``baseline`` for every overlapping scope.

    Both reports must cover the same step range.  District deltas are only
    computed when the two runs simulated the same building set.
    """
    if report.range_ != baseline.range_:
        raise ValueError(
            f"cannot compare across ranges {report.range_} vs {baseline.range_}"
        )
    deltas: dict[str, dict[str, float | None]] = {}
    for name, values in report.buildings.items():
        if name not in baseline.buildings:
            continue
        base_values = baseline.buildings[name]
        deltas[name] = {
            k: percent_delta(values[k], base_values[k]) for k in values if k in base_values
        }
    if set(report.buildings) == set(baseline.buildings):
        deltas["district"] = {
            k: percent_delta(report.district[k], baseline.district[k])
            for k in report.district
            if k in baseline.district
        }
    report.baselines[baseline.config_id] = deltas
    return report
