"""Benchmark configurations, named ``algo-buildings-objective-devices``.

Fields are dash-separated; underscores join values inside a field, so
``rlc-b1_b2-p-bess_pv`` reads: learned control, buildings B1 and B2, peak
objective, battery plus PV.  ``x`` marks an empty field.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .evaluation import RewardSpec

ALGOS = ("x", "rbc", "rlc")
OBJECTIVES = {
    "x": None,
    "c": "cost",
    "e": "emissions",
    "p": "avg_daily_peak",
    "d_o": "discomfort_consumption",
}
OBJECTIVE_CODES = {v: k for k, v in OBJECTIVES.items()}
DEVICES = ("dhw", "bess", "pv", "hp")

# The benchmark matrix: two no-control baselines, seven rule-based runs,
# eight learned runs.
PRESET_IDS = (
    "x-b1_b2-x-x",
    "x-b1_b2-x-pv",
    "rbc-b1-c-dhw",
    "rbc-b1-e-dhw",
    "rbc-b1-c-bess_pv",
    "rbc-b1-e-bess_pv",
    "rbc-b1-c-dhw_bess_pv",
    "rbc-b1-e-dhw_bess_pv",
    "rbc-b1_b2-p-bess_pv",
    "rlc-b1-c-dhw",
    "rlc-b1-e-dhw",
    "rlc-b1-c-bess_pv",
    "rlc-b1-e-bess_pv",
    "rlc-b1-c-dhw_bess_pv",
    "rlc-b1-e-dhw_bess_pv",
    "rlc-b1-d_o-hp",
    "rlc-b1_b2-p-bess_pv",
)
BASELINE_IDS = ("x-b1_b2-x-x", "x-b1_b2-x-pv")

DEFAULT_EPOCHS = 150
DEFAULT_M = 3.0


class PresetError(ValueError):
    """An unparsable or inconsistent configuration id."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one benchmark run needs besides the dataset."""

    config_id: str
    algo: str
    buildings: tuple[str, ...]
    objective: str | None
    devices: frozenset[str]
    seed: int = 0
    epochs: int = DEFAULT_EPOCHS
    m: float = DEFAULT_M
    topology: str = "centralized"
    agent_override: str | None = None
    outage_mode: str = "none"  # none | stochastic | static:<path>
    saifi_events_per_year: float = 1.5
    caidi_hours: float = 2.0
    outage_seed: int = 0
    futile_penalty: float = 0.0
    include_fixed_charges: bool = False

    def reward_spec(self) -> RewardSpec | None:
        if self.objective is None:
            return None
        if self.objective == "discomfort_consumption":
            return RewardSpec("discomfort_consumption", m=self.m)
        return RewardSpec(self.objective)

    @property
    def agent_kind(self) -> str:
        if self.agent_override is not None:
            return self.agent_override
        return {"x": "none", "rbc": "rbc", "rlc": "qlearn"}[self.algo]


def parse_preset(preset_id: str, **overrides) -> RunConfig:
    """Parse an id like ``rbc-b1-c-dhw_bess_pv`` into a RunConfig."""
    parts = preset_id.split("-")
    if len(parts) != 4:
        raise PresetError(
            f"{preset_id!r}: expected algo-buildings-objective-devices (4 dash-separated fields)"
        )
    algo, buildings_field, objective_field, devices_field = parts
    if algo not in ALGOS:
        raise PresetError(f"{preset_id!r}: unknown algorithm {algo!r} (one of {ALGOS})")
    buildings = tuple(p.upper() for p in buildings_field.split("_") if p)
    if not buildings or not all(b[0] == "B" and b[1:].isdigit() for b in buildings):
        raise PresetError(f"{preset_id!r}: bad buildings field {buildings_field!r}")
    if objective_field not in OBJECTIVES:
        raise PresetError(
            f"{preset_id!r}: unknown objective {objective_field!r} (one of {sorted(OBJECTIVES)})"
        )
    objective = OBJECTIVES[objective_field]
    if devices_field == "x":
        devices: frozenset[str] = frozenset()
    else:
        listed = devices_field.split("_")
        unknown = [d for d in listed if d not in DEVICES]
        if unknown:
            raise PresetError(f"{preset_id!r}: unknown devices {unknown} (one of {DEVICES})")
        if len(set(listed)) != len(listed):
            raise PresetError(f"{preset_id!r}: duplicate devices in {devices_field!r}")
        devices = frozenset(listed)
    if algo == "x" and objective is not None:
        raise PresetError(f"{preset_id!r}: a no-control run cannot target an objective")
    if algo != "x" and objective is None:
        raise PresetError(f"{preset_id!r}: a controlled run needs an objective")
    if algo != "x" and not devices:
        raise PresetError(f"{preset_id!r}: a controlled run needs at least one device")
    if algo == "rbc" and objective == "discomfort_consumption":
        raise PresetError(f"{preset_id!r}: no rule-based schedule exists for d_o")
    if "hp" in devices and objective != "discomfort_consumption":
        raise PresetError(f"{preset_id!r}: heat pump control pairs with the d_o objective")
    config = RunConfig(
        config_id=preset_id,
        algo=algo,
        buildings=buildings,
        objective=objective,
        devices=devices,
    )
    if overrides:
        config = replace(config, **overrides)
    return config


def format_preset(config: RunConfig) -> str:
    """Inverse of parse_preset for the canonical fields."""
    buildings = "_".join(b.lower() for b in config.buildings)
    objective = OBJECTIVE_CODES[config.objective] if config.objective is not None else "x"
    devices = "_".join(d for d in DEVICES if d in config.devices) or "x"
    return f"{config.algo}-{buildings}-{objective}-{devices}"
