"""The simulation environment: reset/step over a district, with traces.

Per step and per building the settlement order is: space cooling, then DHW
(heater plus tank), then battery, then the grid.  PV offsets load before the
battery draws from the grid; battery discharge never exports.  During an
outage, grid exchange is zero, end uses are served from PV and storage in
priority order (plug, DHW, space conditioning), storage charging only takes
leftover supply, and the shortfall is recorded as unserved energy.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import DistrictDataset
from .energy_systems import (
    StorageState,
    device_step,
    heat_pump_cop,
    initial_storage_state,
    pv_output,
    storage_step,
)
from .evaluation import RewardSpec, reward
from .outage import OutageSignal
from .thermal import DynamicsInputWindow, load_surrogate, predict_temperature, rc_step

# Canonical observation vocabulary; district-level names come first.
DISTRICT_OBSERVATIONS = (
    "hour",
    "day_of_week",
    "electricity_rate",
    "carbon_intensity",
    "outdoor_temp",
)
BUILDING_OBSERVATIONS = (
    "net_electricity_consumption",
    "solar_generation",
    "battery_soc",
    "dhw_soc",
    "indoor_temp",
    "setpoint",
    "abs_temp_delta",
)
OBSERVATION_NAMES = DISTRICT_OBSERVATIONS + BUILDING_OBSERVATIONS

ACTION_DEVICES = ("dhw_storage", "battery", "heat_pump")
TRACE_SCHEMA = "gridbench-trace-1"


@dataclass(frozen=True)
class BuildingControl:
    """Which optional devices exist in the run, and whether HVAC is on the agent."""

    has_dhw_storage: bool = False
    has_battery: bool = False
    has_pv: bool = False
    control_heat_pump: bool = False


@dataclass(frozen=True)
class EnvConfig:
    controls: dict[str, BuildingControl]
    observation_names: tuple[str, ...] = OBSERVATION_NAMES
    reward: RewardSpec | None = None
    topology: str = "centralized"
    outage: OutageSignal | None = None
    futile_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.topology not in ("centralized", "independent"):
            raise ValueError(f"unknown topology {self.topology!r}")
        unknown = [n for n in self.observation_names if n not in OBSERVATION_NAMES]
        if unknown:
            raise ValueError(f"unknown observations {unknown}")
        if self.futile_penalty < 0:
            raise ValueError("futile_penalty must be >= 0")


@dataclass
class BuildingTrace:
    e_kwh: list = field(default_factory=list)
    grid_import_kwh: list = field(default_factory=list)
    grid_export_kwh: list = field(default_factory=list)
    pv_kwh: list = field(default_factory=list)
    pv_used_kwh: list = field(default_factory=list)
    battery_in_kwh: list = field(default_factory=list)
    battery_out_kwh: list = field(default_factory=list)
    dhw_storage_in_kwh: list = field(default_factory=list)
    dhw_storage_out_kwh: list = field(default_factory=list)
    hvac_electric_kwh: list = field(default_factory=list)
    heater_electric_kwh: list = field(default_factory=list)
    plug_served_kwh: list = field(default_factory=list)
    cooling_delivered_kwh: list = field(default_factory=list)
    dhw_served_kwh: list = field(default_factory=list)
    demand_electric_kwh: list = field(default_factory=list)
    unserved_kwh: list = field(default_factory=list)
    indoor_c: list = field(default_factory=list)
    setpoint_c: list = field(default_factory=list)
    battery_soc: list = field(default_factory=list)
    dhw_storage_soc: list = field(default_factory=list)


@dataclass(frozen=True)
class FrozenBuildingTrace:
    e_kwh: np.ndarray
    grid_import_kwh: np.ndarray
    grid_export_kwh: np.ndarray
    pv_kwh: np.ndarray
    pv_used_kwh: np.ndarray
    battery_in_kwh: np.ndarray
    battery_out_kwh: np.ndarray
    dhw_storage_in_kwh: np.ndarray
    dhw_storage_out_kwh: np.ndarray
    hvac_electric_kwh: np.ndarray
    heater_electric_kwh: np.ndarray
    plug_served_kwh: np.ndarray
    cooling_delivered_kwh: np.ndarray
    dhw_served_kwh: np.ndarray
    demand_electric_kwh: np.ndarray
    unserved_kwh: np.ndarray
    indoor_c: np.ndarray
    setpoint_c: np.ndarray
    battery_soc: np.ndarray
    dhw_storage_soc: np.ndarray


@dataclass(frozen=True)
class EpisodeTrace:
    """Per-step series of one episode, frozen to numpy arrays."""

    buildings: dict[str, FrozenBuildingTrace]
    rate: np.ndarray
    carbon: np.ndarray
    outage: np.ndarray
    hour: np.ndarray
    range_: tuple[int, int]
    steps_per_day: int
    dt_hours: float
    fixed_charge_per_step: float = 0.0

    @property
    def n_steps(self) -> int:
        return int(self.rate.size)

    def district_demand_kw(self) -> np.ndarray:
        total = np.zeros(self.n_steps)
        for b in self.buildings.values():
            total += b.e_kwh
        return total / self.dt_hours

    def daily_peaks_kw(self) -> np.ndarray:
        demand = self.district_demand_kw()
        if demand.size % self.steps_per_day != 0:
            raise ValueError("trace does not cover whole days")
        return demand.reshape(-1, self.steps_per_day).max(axis=1)

    def to_csv(self, path: str | Path) -> None:
        fields = [f for f in FrozenBuildingTrace.__dataclass_fields__]
        demand = self.district_demand_kw()
        with Path(path).open("w", newline="") as handle:
            handle.write(f"# schema: {TRACE_SCHEMA}\n")
            writer = csv.writer(handle)
            writer.writerow(
                ["step", "hour", "building"]
                + fields
                + ["rate_usd_per_kwh", "carbon_kg_per_kwh", "outage", "district_demand_kw"]
            )
            lo = self.range_[0]
            for t in range(self.n_steps):
                for name, b in self.buildings.items():
                    writer.writerow(
                        [lo + t, int(self.hour[t]), name]
                        + [repr(float(getattr(b, f)[t])) for f in fields]
                        + [
                            repr(float(self.rate[t])),
                            repr(float(self.carbon[t])),
                            int(self.outage[t]),
                            repr(float(demand[t])),
                        ]
                    )


@dataclass
class StepOutcome:
    observations: dict
    rewards: dict[str, float]
    done: bool
    info: dict


class Environment:
    """Stateful simulator over a dataset range.  Use reset() then step()."""

    def __init__(self, dataset: DistrictDataset, config: EnvConfig):
        self.dataset = dataset
        self.config = config
        self._dt = dataset.dt_hours
        for name, ctrl in config.controls.items():
            if name not in dataset.buildings:
                raise ValueError(f"config references unknown building {name!r}")
            spec = dataset.buildings[name].spec
            if ctrl.has_dhw_storage and spec.dhw_storage is None:
                raise ValueError(f"{name}: config enables dhw_storage but none is specified")
            if ctrl.has_battery and spec.battery is None:
                raise ValueError(f"{name}: config enables battery but none is specified")
            if ctrl.has_pv and spec.pv is None:
                raise ValueError(f"{name}: config enables pv but none is specified")
        if not config.controls:
            raise ValueError("config selects no buildings")
        if config.outage is not None and len(config.outage) != dataset.n_steps:
            raise ValueError(
                f"outage signal has {len(config.outage)} steps, dataset has {dataset.n_steps}"
            )
        self.building_names = list(config.controls)
        self._surrogates: dict[str, object] = {}
        for name in self.building_names:
            spec = dataset.buildings[name].spec
            if spec.surrogate_file is not None:
                base = dataset.root if dataset.root is not None else Path(".")
                self._surrogates[name] = load_surrogate(base / spec.surrogate_file)
        # per-step calendar and pricing, as plain lists for the hot loop
        n = dataset.n_steps
        self._hours = [dataset.hour_of(t) for t in range(n)]
        self._dows = [dataset.day_of_week(t) for t in range(n)]
        self._rate = dataset.rate.values.tolist()
        self._carbon = dataset.carbon.values.tolist()
        self._outdoor = dataset.outdoor_temp.values.tolist()
        self._pv_per_kw = dataset.pv_per_kw.values.tolist()
        self._t = 0
        self._range: tuple[int, int] | None = None
        self._done = True

    # ------------------------------------------------------------- metadata

    def action_slots(self) -> list[tuple[str, str]]:
        """Canonical (building, device) order for flat action encodings."""
        slots = []
        for name in self.building_names:
            ctrl = self.config.controls[name]
            if ctrl.has_dhw_storage:
                slots.append((name, "dhw_storage"))
            if ctrl.has_battery:
                slots.append((name, "battery"))
            if ctrl.control_heat_pump:
                slots.append((name, "heat_pump"))
        return slots

    def action_ranges(self) -> dict[str, tuple[float, float]]:
        return {
            f"{b}.{d}": ((0.0, 1.0) if d == "heat_pump" else (-1.0, 1.0))
            for b, d in self.action_slots()
        }

    def active_building_observations(self, name: str) -> list[str]:
        ctrl = self.config.controls[name]
        active = []
        for obs in BUILDING_OBSERVATIONS:
            if obs not in self.config.observation_names:
                continue
            if obs in ("solar_generation",) and not ctrl.has_pv:
                continue
            if obs == "battery_soc" and not ctrl.has_battery:
                continue
            if obs == "dhw_soc" and not ctrl.has_dhw_storage:
                continue
            active.append(obs)
        return active

    def observation_names_flat(self) -> list[str]:
        names = [o for o in DISTRICT_OBSERVATIONS if o in self.config.observation_names]
        for building in self.building_names:
            names += [f"{building}.{o}" for o in self.active_building_observations(building)]
        return names

    # ------------------------------------------------------------- lifecycle

    def reset(self, range_: tuple[int, int], seed: int | None = None) -> dict:
        lo, hi = range_
        if not 0 <= lo < hi <= self.dataset.n_steps:
            raise ValueError(f"range {range_} outside dataset horizon {self.dataset.n_steps}")
        self._range = (lo, hi)
        self._seed = seed
        self._t = lo
        self._done = False
        self._prev_e = {name: 0.0 for name in self.building_names}
        self._tes_state: dict[str, StorageState] = {}
        self._batt_state: dict[str, StorageState] = {}
        self._indoor: dict[str, float] = {}
        self._history: dict[str, list[tuple[float, float]]] = {}
        for name in self.building_names:
            bld = self.dataset.buildings[name]
            ctrl = self.config.controls[name]
            if ctrl.has_dhw_storage:
                self._tes_state[name] = initial_storage_state(bld.spec.dhw_storage)
            if ctrl.has_battery:
                self._batt_state[name] = initial_storage_state(bld.spec.battery)
            self._indoor[name] = float(bld.setpoint.values[lo])
            self._history[name] = [(self._indoor[name], 0.0)]
        self._trace = {name: BuildingTrace() for name in self.building_names}
        self._trace_rate: list[float] = []
        self._trace_carbon: list[float] = []
        self._trace_outage: list[int] = []
        self._trace_hour: list[int] = []
        return self._observations()

    def _obs_step(self) -> int:
        return min(self._t, self.dataset.n_steps - 1)

    def _building_observation(self, name: str, t: int) -> dict[str, float]:
        bld = self.dataset.buildings[name]
        ctrl = self.config.controls[name]
        values: dict[str, float] = {}
        for obs in self.active_building_observations(name):
            if obs == "net_electricity_consumption":
                values[obs] = self._prev_e[name]
            elif obs == "solar_generation":
                values[obs] = pv_output(bld.spec.pv, self._pv_per_kw[t])
            elif obs == "battery_soc":
                values[obs] = self._batt_state[name].soc_kwh / bld.spec.battery.capacity_kwh
            elif obs == "dhw_soc":
                values[obs] = self._tes_state[name].soc_kwh / bld.spec.dhw_storage.capacity_kwh
            elif obs == "indoor_temp":
                values[obs] = self._indoor[name]
            elif obs == "setpoint":
                values[obs] = float(bld.setpoint.values[t])
            elif obs == "abs_temp_delta":
                values[obs] = abs(self._indoor[name] - float(bld.setpoint.values[t]))
        return values

    def _district_observation(self, t: int) -> dict[str, float]:
        values: dict[str, float] = {}
        for obs in DISTRICT_OBSERVATIONS:
            if obs not in self.config.observation_names:
                continue
            if obs == "hour":
                values[obs] = float(self._hours[t])
            elif obs == "day_of_week":
                values[obs] = float(self._dows[t])
            elif obs == "electricity_rate":
                values[obs] = self._rate[t]
            elif obs == "carbon_intensity":
                values[obs] = self._carbon[t]
            elif obs == "outdoor_temp":
                values[obs] = self._outdoor[t]
        return values

    def assemble_observations(self, building: str) -> dict[str, float]:
        """Observation vector for one building (district fields included)."""
        if building not in self.config.controls:
            raise ValueError(f"unknown building {building!r}")
        t = self._obs_step()
        out = self._district_observation(t)
        out.update(self._building_observation(building, t))
        return out

    def _observations(self) -> dict:
        t = self._obs_step()
        if self.config.topology == "independent":
            return {name: self.assemble_observations(name) for name in self.building_names}
        flat = self._district_observation(t)
        for name in self.building_names:
            for obs, value in self._building_observation(name, t).items():
                flat[f"{name}.{obs}"] = value
        return flat

    # ------------------------------------------------------------- stepping

    def _validate_actions(
        self, actions: Mapping[str, Mapping[str, float]] | None
    ) -> tuple[dict[str, dict[str, float]], dict[str, float]]:
        cleaned: dict[str, dict[str, float]] = {
            name: {"dhw_storage": 0.0, "battery": 0.0, "heat_pump": 0.0}
            for name in self.building_names
        }
        clamped: dict[str, float] = {}
        if actions is None:
            return cleaned, clamped
        slots = set(self.action_slots())
        for building, devices in actions.items():
            if building not in self.config.controls:
                raise ValueError(f"action for unknown building {building!r}")
            for device, value in devices.items():
                if device not in ACTION_DEVICES:
                    raise ValueError(f"{building}: unknown device {device!r}")
                if (building, device) not in slots:
                    raise ValueError(
                        f"{building}: device {device!r} is not controlled in this run"
                    )
                value = float(value)
                if not math.isfinite(value):
                    raise ValueError(f"{building}.{device}: non-finite action")
                lo, hi = (0.0, 1.0) if device == "heat_pump" else (-1.0, 1.0)
                bounded = min(max(value, lo), hi)
                if bounded != value:
                    clamped[f"{building}.{device}"] = value
                cleaned[building][device] = bounded
        return cleaned, clamped

    def step(self, actions: Mapping[str, Mapping[str, float]] | None = None) -> StepOutcome:
        if self._done:
            raise RuntimeError("episode is done; call reset() first")
        t = self._t
        dt = self._dt
        cleaned, clamped = self._validate_actions(actions)
        outage_now = bool(self.config.outage.active[t]) if self.config.outage is not None else False
        futile: list[str] = []
        total_unserved = 0.0
        e_by_building: dict[str, float] = {}

        for name in self.building_names:
            bld = self.dataset.buildings[name]
            spec = bld.spec
            ctrl = self.config.controls[name]
            acts = cleaned[name]
            heater_eff = spec.dhw_heater.efficiency
            heater_cap_e = spec.dhw_heater.nominal_power_kw * dt

            # --- space cooling request (electric side)
            cop = heat_pump_cop(spec.heat_pump, self._outdoor[t])
            ideal_cooling = float(bld.cooling_load.values[t])
            if ctrl.control_heat_pump:
                hvac_e_req, _ = device_step(spec.heat_pump, cop, acts["heat_pump"], dt)
            else:
                hvac_e_req = min(ideal_cooling, spec.heat_pump.nominal_power_kw * dt * cop) / cop

            # --- DHW request; a discharging tank commits immediately (no grid needed)
            dhw_demand = float(bld.dhw_load.values[t])
            tes_in = tes_out = 0.0
            tes_action = acts["dhw_storage"]
            tes_pending = False
            new_tes = self._tes_state.get(name)
            if ctrl.has_dhw_storage and tes_action < 0:
                new_tes, _, tes_out = storage_step(
                    spec.dhw_storage,
                    self._tes_state[name],
                    tes_action,
                    dt,
                    discharge_out_cap_kwh=dhw_demand,
                )
                dhw_e_req = min(max(dhw_demand - tes_out, 0.0) / heater_eff, heater_cap_e)
            else:
                tes_pending = ctrl.has_dhw_storage
                dhw_e_req = min(dhw_demand / heater_eff, heater_cap_e)
            plug_req = float(bld.plug_load.values[t])

            pv_kwh = pv_output(spec.pv, self._pv_per_kw[t]) if ctrl.has_pv else 0.0
            batt_action = acts["battery"]
            batt_in = batt_out = 0.0
            new_batt = self._batt_state.get(name)

            if not outage_now:
                plug_served, dhw_e, hvac_e = plug_req, dhw_e_req, hvac_e_req
                if tes_pending:
                    spare_thermal = max(heater_cap_e - dhw_e, 0.0) * heater_eff
                    new_tes, tes_in, _ = storage_step(
                        spec.dhw_storage,
                        self._tes_state[name],
                        tes_action,
                        dt,
                        charge_in_cap_kwh=spare_thermal,
                    )
                heater_e = dhw_e + tes_in / heater_eff
                base = plug_served + heater_e + hvac_e
                if ctrl.has_battery:
                    if batt_action < 0:
                        new_batt, _, batt_out = storage_step(
                            spec.battery,
                            self._batt_state[name],
                            batt_action,
                            dt,
                            discharge_out_cap_kwh=max(base - pv_kwh, 0.0),
                        )
                    else:
                        new_batt, batt_in, _ = storage_step(
                            spec.battery, self._batt_state[name], batt_action, dt
                        )
                e = base + batt_in - batt_out - pv_kwh
                grid_import = max(e, 0.0)
                grid_export = max(-e, 0.0)
                pv_used = pv_kwh - grid_export  # battery never exports, so surplus is PV's
                unserved = 0.0
                demand_e = plug_req + dhw_e_req + hvac_e_req
            else:
                # island mode: serve end uses from PV + battery, charge from leftovers
                demand_e = plug_req + dhw_e_req + hvac_e_req
                supply = pv_kwh
                if ctrl.has_battery and batt_action < 0:
                    new_batt, _, batt_out = storage_step(
                        spec.battery,
                        self._batt_state[name],
                        batt_action,
                        dt,
                        discharge_out_cap_kwh=max(demand_e - supply, 0.0),
                    )
                    supply += batt_out
                plug_served = min(plug_req, supply)
                supply -= plug_served
                dhw_e = min(dhw_e_req, supply)
                supply -= dhw_e
                hvac_e = min(hvac_e_req, supply)
                supply -= hvac_e
                # leftover supply may charge storage: tank settles before battery
                if tes_pending:
                    spare_thermal = max(heater_cap_e - dhw_e, 0.0) * heater_eff
                    new_tes, tes_in, _ = storage_step(
                        spec.dhw_storage,
                        self._tes_state[name],
                        tes_action,
                        dt,
                        charge_in_cap_kwh=min(spare_thermal, supply * heater_eff),
                    )
                    supply -= tes_in / heater_eff
                if ctrl.has_battery and batt_action >= 0:
                    new_batt, batt_in, _ = storage_step(
                        spec.battery,
                        self._batt_state[name],
                        batt_action,
                        dt,
                        charge_in_cap_kwh=supply,
                    )
                    supply -= batt_in
                heater_e = dhw_e + tes_in / heater_eff
                unserved = max(demand_e - (plug_served + dhw_e + hvac_e), 0.0)
                e = 0.0
                grid_import = grid_export = 0.0
                pv_used = max(pv_kwh - max(supply, 0.0), 0.0)

            if ctrl.has_dhw_storage and abs(tes_action) > 1e-12 and tes_in == 0.0 and tes_out == 0.0:
                futile.append(f"{name}.dhw_storage")
            if ctrl.has_battery and abs(batt_action) > 1e-12 and batt_in == 0.0 and batt_out == 0.0:
                futile.append(f"{name}.battery")

            delivered_cooling = hvac_e * cop
            dhw_served = tes_out + dhw_e * heater_eff
            setpoint_now = float(bld.setpoint.values[t])
            indoor_now = self._indoor[name]

            trace = self._trace[name]
            trace.e_kwh.append(e)
            trace.grid_import_kwh.append(grid_import)
            trace.grid_export_kwh.append(grid_export)
            trace.pv_kwh.append(pv_kwh)
            trace.pv_used_kwh.append(pv_used)
            trace.battery_in_kwh.append(batt_in)
            trace.battery_out_kwh.append(batt_out)
            trace.dhw_storage_in_kwh.append(tes_in)
            trace.dhw_storage_out_kwh.append(tes_out)
            trace.hvac_electric_kwh.append(hvac_e)
            trace.heater_electric_kwh.append(heater_e)
            trace.plug_served_kwh.append(plug_served)
            trace.cooling_delivered_kwh.append(delivered_cooling)
            trace.dhw_served_kwh.append(dhw_served)
            trace.demand_electric_kwh.append(demand_e)
            trace.unserved_kwh.append(unserved)
            trace.indoor_c.append(indoor_now)
            trace.setpoint_c.append(setpoint_now)
            trace.battery_soc.append(
                new_batt.soc_kwh / spec.battery.capacity_kwh if ctrl.has_battery else 0.0
            )
            trace.dhw_storage_soc.append(
                new_tes.soc_kwh / spec.dhw_storage.capacity_kwh if ctrl.has_dhw_storage else 0.0
            )

            # advance temperature for the next step
            if name in self._surrogates:
                self._history[name].append((indoor_now, delivered_cooling))
                self._indoor[name] = self._surrogate_predict(name, t)
            else:
                self._indoor[name] = rc_step(
                    spec.thermal_model, indoor_now, self._outdoor[t], delivered_cooling, dt
                )

            if ctrl.has_dhw_storage:
                self._tes_state[name] = new_tes
            if ctrl.has_battery:
                self._batt_state[name] = new_batt
            total_unserved += unserved
            e_by_building[name] = e
            self._prev_e[name] = e

        self._trace_rate.append(self._rate[t])
        self._trace_carbon.append(self._carbon[t])
        self._trace_outage.append(1 if outage_now else 0)
        self._trace_hour.append(self._hours[t])

        district_demand_kw = sum(e_by_building.values()) / dt
        rewards = self._rewards(e_by_building, district_demand_kw, t, futile)

        self._t = t + 1
        self._done = self._t >= self._range[1]
        info = {
            "step": t,
            "outage": outage_now,
            "unserved_kwh": total_unserved,
            "clamped": clamped,
            "futile": futile,
            "district_demand_kw": district_demand_kw,
        }
        return StepOutcome(
            observations=self._observations(),
            rewards=rewards,
            done=self._done,
            info=info,
        )

    def _surrogate_predict(self, name: str, t: int) -> float:
        model = self._surrogates[name]
        history = self._history[name]
        rows = []
        for j in range(model.lookback):
            s = t - model.lookback + 1 + j
            s_clamped = min(max(s, 0), self.dataset.n_steps - 1)
            k = len(history) - model.lookback + j
            indoor, delivered = history[max(k, 0)]
            row = []
            for feature in model.features:
                if feature == "indoor_temp_c":
                    row.append(indoor)
                elif feature == "delivered_cooling_kwh":
                    row.append(delivered)
                elif feature == "outdoor_temp_c":
                    row.append(self._outdoor[s_clamped])
                elif feature == "hour_of_day":
                    row.append(float(self._hours[s_clamped]))
                elif feature == "day_of_week":
                    row.append(float(self._dows[s_clamped]))
                elif feature == "hour_sin":
                    row.append(math.sin(2 * math.pi * self._hours[s_clamped] / 24.0))
                elif feature == "hour_cos":
                    row.append(math.cos(2 * math.pi * self._hours[s_clamped] / 24.0))
            rows.append(row)
        return predict_temperature(model, DynamicsInputWindow(np.asarray(rows)))

    def _rewards(
        self,
        e_by_building: dict[str, float],
        district_demand_kw: float,
        t: int,
        futile: list[str],
    ) -> dict[str, float]:
        spec = self.config.reward
        if spec is None:
            return {}
        per_building: dict[str, float] = {}
        for name, e in e_by_building.items():
            bld = self.dataset.buildings[name]
            state = {
                "e": e,
                "rate": self._rate[t],
                "carbon": self._carbon[t],
                "indoor_temp": self._trace[name].indoor_c[-1],
                "setpoint": self._trace[name].setpoint_c[-1],
                "district_demand_kw": district_demand_kw,
            }
            per_building[name] = reward(spec, state)
        if self.config.futile_penalty > 0:
            for slot in futile:
                building = slot.split(".", 1)[0]
                per_building[building] -= self.config.futile_penalty
        if self.config.topology == "independent":
            return per_building
        if spec.kind == "avg_daily_peak":
            central = -max(district_demand_kw, 0.0)
            if self.config.futile_penalty > 0:
                central -= self.config.futile_penalty * len(futile)
            return {"central": central}
        return {"central": sum(per_building.values())}

    # ------------------------------------------------------------- trace

    def trace(self) -> EpisodeTrace:
        if self._range is None:
            raise RuntimeError("no episode has been run")
        frozen = {
            name: FrozenBuildingTrace(
                **{f: np.asarray(getattr(t, f), dtype=float) for f in BuildingTrace.__dataclass_fields__}
            )
            for name, t in self._trace.items()
        }
        lo = self._range[0]
        return EpisodeTrace(
            buildings=frozen,
            rate=np.asarray(self._trace_rate, dtype=float),
            carbon=np.asarray(self._trace_carbon, dtype=float),
            outage=np.asarray(self._trace_outage, dtype=int),
            hour=np.asarray(self._trace_hour, dtype=int),
            range_=(lo, lo + len(self._trace_rate)),
            steps_per_day=self.dataset.steps_per_day,
            dt_hours=self._dt,
            fixed_charge_per_step=self.dataset.fixed_charge_per_step,
        )


def reset(
    dataset: DistrictDataset,
    config: EnvConfig,
    range_: tuple[int, int],
    seed: int | None = None,
) -> tuple[Environment, dict]:
    """Build an environment and start an episode; returns (env, observations)."""
    env = Environment(dataset, config)
    return env, env.reset(range_, seed)
