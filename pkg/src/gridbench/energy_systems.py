"""Device models: heat pump, electric heater, storage, PV.

All flows are energies in kWh over one step of ``dt_hours``.  Storage state is
immutable; ``storage_step`` returns the successor state so callers can probe
actions without committing them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

KELVIN_OFFSET = 273.15

# Loader defaults for the two storage roles.  A battery ships with a
# round-trip efficiency of 0.90 and a 20% SOC floor; a thermal tank is
# lossless in-and-out but bleeds 0.2% of its charge per step.
BATTERY_DEFAULTS = {
    "round_trip_efficiency": 0.90,
    "soc_min_fraction": 0.20,
    "loss_per_step": 0.0,
}
THERMAL_STORAGE_DEFAULTS = {
    "round_trip_efficiency": 1.0,
    "soc_min_fraction": 0.0,
    "loss_per_step": 0.002,
}


@dataclass(frozen=True)
class HeatPumpSpec:
    """Carnot-style heat pump; target_temp_c is the supply temperature."""

    nominal_power_kw: float
    technical_efficiency: float = 0.2
    target_temp_c: float = 8.0
    cop_cap: float = 10.0
    mode: str = "cooling"

    def __post_init__(self) -> None:
        if self.nominal_power_kw <= 0:
            raise ValueError("nominal_power_kw must be positive")
        if not 0 < self.technical_efficiency <= 1:
            raise ValueError("technical_efficiency must be in (0, 1]")
        if self.cop_cap < 1:
            raise ValueError("cop_cap must be >= 1")
        if self.mode not in ("cooling", "heating"):
            raise ValueError(f"unknown heat pump mode {self.mode!r}")


@dataclass(frozen=True)
class ElectricHeaterSpec:
    nominal_power_kw: float
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if self.nominal_power_kw <= 0:
            raise ValueError("nominal_power_kw must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must be in (0, 1]")


@dataclass(frozen=True)
class StorageSpec:
    capacity_kwh: float
    max_charge_power_kw: float
    max_discharge_power_kw: float
    round_trip_efficiency: float = 1.0
    soc_min_fraction: float = 0.0
    loss_per_step: float = 0.0

    def __post_init__(self) -> None:
        if self.capacity_kwh <= 0:
            raise ValueError("capacity_kwh must be positive")
        if self.max_charge_power_kw < 0 or self.max_discharge_power_kw < 0:
            raise ValueError("storage power limits must be >= 0")
        if not 0 < self.round_trip_efficiency <= 1:
            raise ValueError("round_trip_efficiency must be in (0, 1]")
        if not 0 <= self.soc_min_fraction < 1:
            raise ValueError("soc_min_fraction must be in [0, 1)")
        if not 0 <= self.loss_per_step < 1:
            raise ValueError("loss_per_step must be in [0, 1)")

    @property
    def one_way_efficiency(self) -> float:
        return math.sqrt(self.round_trip_efficiency)

    @property
    def soc_floor_kwh(self) -> float:
        return self.soc_min_fraction * self.capacity_kwh


@dataclass(frozen=True)
class StorageState:
    soc_kwh: float


def initial_storage_state(spec: StorageSpec) -> StorageState:
    return StorageState(soc_kwh=spec.soc_floor_kwh)


@dataclass(frozen=True)
class PvSpec:
    nominal_power_kw: float

    def __post_init__(self) -> None:
        if self.nominal_power_kw < 0:
            raise ValueError("nominal_power_kw must be >= 0")


def heat_pump_cop(spec: HeatPumpSpec, outdoor_temp_c: float) -> float:
    """Carnot COP scaled by technical efficiency, clamped to [1, cop_cap].

    When the outdoor temperature does not oppose the target (no thermal lift
    needed) the COP saturates at the cap.
    """
    t_target = spec.target_temp_c + KELVIN_OFFSET
    t_outdoor = outdoor_temp_c + KELVIN_OFFSET
    lift = t_outdoor - t_target if spec.mode == "cooling" else t_target - t_outdoor
    if lift <= 0:
        return spec.cop_cap
    cop = spec.technical_efficiency * t_target / lift
    return min(max(cop, 1.0), spec.cop_cap)


def device_step(
    spec: HeatPumpSpec | ElectricHeaterSpec,
    cop_or_efficiency: float,
    power_fraction: float,
    dt_hours: float,
) -> tuple[float, float]:
    """Run a converter for one step; returns (electric_kwh, thermal_kwh).

    ``power_fraction`` must already be in [0, 1]; the environment clamps agent
    actions before calling in here.
    """
    if not 0.0 <= power_fraction <= 1.0:
        raise ValueError(f"power_fraction {power_fraction} outside [0, 1]")
    if dt_hours <= 0:
        raise ValueError("dt_hours must be positive")
    electric = power_fraction * spec.nominal_power_kw * dt_hours
    return electric, electric * cop_or_efficiency


def storage_step(
    spec: StorageSpec,
    state: StorageState,
    action: float,
    dt_hours: float,
    *,
    charge_in_cap_kwh: float = math.inf,
    discharge_out_cap_kwh: float = math.inf,
) -> tuple[StorageState, float, float]:
    """Apply one storage action; returns (new_state, charged_in, discharged_out).

    ``action`` requests a SOC change of ``action * capacity_kwh`` and is
    clamped to [-1, 1]; all infeasible requests are clamped, never rejected.
    ``charged_in`` and ``discharged_out`` are the external-side energies (what
    the bus supplies or receives); at most one of them is nonzero.  Standing
    loss decays the charge before the flow, floored at the SOC minimum so the
    state never exits [soc_min*capacity, capacity].
    """
    if dt_hours <= 0:
        raise ValueError("dt_hours must be positive")
    action = min(max(action, -1.0), 1.0)
    one_way = spec.one_way_efficiency
    floor = spec.soc_floor_kwh
    soc = max(floor, state.soc_kwh * (1.0 - spec.loss_per_step))
    charged_in = 0.0
    discharged_out = 0.0
    if action > 0:
        gain = min(
            action * spec.capacity_kwh,
            spec.capacity_kwh - soc,
            spec.max_charge_power_kw * dt_hours * one_way,
            charge_in_cap_kwh * one_way,
        )
        gain = max(gain, 0.0)
        charged_in = gain / one_way
        soc += gain
    elif action < 0:
        drop = min(
            -action * spec.capacity_kwh,
            soc - floor,
            spec.max_discharge_power_kw * dt_hours / one_way,
            discharge_out_cap_kwh / one_way,
        )
        drop = max(drop, 0.0)
        discharged_out = drop * one_way
        soc -= drop
    soc = min(max(soc, floor), spec.capacity_kwh)
    return StorageState(soc_kwh=soc), charged_in, discharged_out


def pv_output(spec: PvSpec, per_kw_kwh: float) -> float:
    """Generation in kWh for one step given the per-kW yield of that step."""
    if per_kw_kwh < 0:
        raise ValueError("per-kW generation must be >= 0")
    return spec.nominal_power_kw * per_kw_kwh
