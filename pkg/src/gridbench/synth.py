"""Synthetic two-building summer district, used as the bundled dataset.

Cooling loads are generated from each building's own RC parameters as the
energy that holds the zone exactly at its (constant) setpoint, so a run with
no control reproduces the setpoint and the ideal loads step for step.
Everything else is shaped noise: a diurnal outdoor sinusoid, a daylight PV
bell, sparse hot-water draws, evening-heavy plug loads, and a carbon series
that is low overnight and high from noon onward.
"""
from __future__ import annotations

import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import (
    BuildingDataset,
    BuildingSpec,
    DistrictDataset,
    SplitSpec,
    TimeSeries,
    default_tou_schedule,
    rate_series_from_tou,
    save_district,
)
from .energy_systems import ElectricHeaterSpec, HeatPumpSpec, PvSpec, StorageSpec
from .thermal import RcModelParams

BUNDLED_NAME = "synthetic_district"
DEFAULT_SEED = 7
DEFAULT_DAYS = 30
DEFAULT_START = datetime.datetime(2018, 6, 1)


def _building_specs() -> list[BuildingSpec]:
    return [
        BuildingSpec(
            name="B1",
            heat_pump=HeatPumpSpec(nominal_power_kw=2.3),
            dhw_heater=ElectricHeaterSpec(nominal_power_kw=3.7, efficiency=1.0),
            thermal_model=RcModelParams(
                capacitance_kwh_per_c=3.0, conductance_kw_per_c=0.18, internal_gain_kw=0.35
            ),
            dhw_storage=StorageSpec(
                capacity_kwh=1.7,
                max_charge_power_kw=3.7,
                max_discharge_power_kw=3.7,
                round_trip_efficiency=1.0,
                soc_min_fraction=0.0,
                loss_per_step=0.002,
            ),
            battery=StorageSpec(
                capacity_kwh=4.0,
                max_charge_power_kw=3.3,
                max_discharge_power_kw=3.3,
                round_trip_efficiency=0.90,
                soc_min_fraction=0.20,
                loss_per_step=0.0,
            ),
            pv=PvSpec(nominal_power_kw=1.2),
        ),
        BuildingSpec(
            name="B2",
            heat_pump=HeatPumpSpec(nominal_power_kw=2.8),
            dhw_heater=ElectricHeaterSpec(nominal_power_kw=6.3, efficiency=1.0),
            thermal_model=RcModelParams(
                capacitance_kwh_per_c=3.5, conductance_kw_per_c=0.22, internal_gain_kw=0.45
            ),
            dhw_storage=StorageSpec(
                capacity_kwh=2.8,
                max_charge_power_kw=6.3,
                max_discharge_power_kw=6.3,
                round_trip_efficiency=1.0,
                soc_min_fraction=0.0,
                loss_per_step=0.002,
            ),
            battery=StorageSpec(
                capacity_kwh=3.3,
                max_charge_power_kw=1.6,
                max_discharge_power_kw=1.6,
                round_trip_efficiency=0.90,
                soc_min_fraction=0.20,
                loss_per_step=0.0,
            ),
            pv=PvSpec(nominal_power_kw=2.4),
        ),
    ]


SETPOINTS = {"B1": 23.5, "B2": 24.0}


def build_district(
    days: int = DEFAULT_DAYS,
    seed: int = DEFAULT_SEED,
    start: datetime.datetime = DEFAULT_START,
) -> DistrictDataset:
    rng = np.random.default_rng(seed)
    n = days * 24
    hours = np.arange(n) % 24

    outdoor = 29.5 + 5.5 * np.cos(2 * np.pi * (hours - 15) / 24.0)
    outdoor = outdoor + rng.uniform(-0.4, 0.4, n)

    daylight = np.clip(np.sin(np.pi * (hours - 6) / 13.0), 0.0, None)
    cloud = np.repeat(rng.uniform(0.75, 1.0, days), 24) * rng.uniform(0.93, 1.0, n)
    pv_per_kw = 0.75 * daylight**2 * cloud

    carbon = np.where(hours < 8, 0.36, np.where(hours < 12, 0.40, 0.44))
    carbon = carbon + rng.uniform(-0.005, 0.005, n)

    specs = _building_specs()
    buildings: dict[str, BuildingDataset] = {}
    outdoor_series = TimeSeries(outdoor, start, 60, "outdoor_temp")
    pv_series = TimeSeries(pv_per_kw, start, 60, "pv_per_kw")
    for index, spec in enumerate(specs):
        setpoint_c = SETPOINTS[spec.name]
        rc = spec.thermal_model
        # exactly the energy that keeps the zone at its setpoint
        cooling = rc.conductance_kw_per_c * (outdoor - setpoint_c) + rc.internal_gain_kw
        cooling = np.maximum(cooling, 0.0)

        scale = 1.0 + 0.7 * index
        plug = 0.25 * scale + rng.uniform(0.0, 0.15, n)
        plug = plug + np.where((hours >= 18) & (hours < 23), 0.5 * scale, 0.0)
        plug = plug + np.where((hours >= 7) & (hours < 10), 0.2 * scale, 0.0)

        dhw = np.zeros(n)
        heater_thermal_cap = spec.dhw_heater.nominal_power_kw * spec.dhw_heater.efficiency
        for day in range(days):
            if rng.random() < 0.9:
                hour = int(rng.integers(6, 9))
                dhw[day * 24 + hour] = rng.uniform(1.0, 1.3) * scale
            if rng.random() < 0.6:
                hour = int(rng.integers(19, 22))
                dhw[day * 24 + hour] = rng.uniform(0.6, 0.9) * scale
        dhw = np.minimum(dhw, 0.9 * heater_thermal_cap)

        buildings[spec.name] = BuildingDataset(
            spec=spec,
            cooling_load=TimeSeries(cooling, start, 60, f"{spec.name}.cooling_load"),
            dhw_load=TimeSeries(dhw, start, 60, f"{spec.name}.dhw_load"),
            plug_load=TimeSeries(plug, start, 60, f"{spec.name}.plug_load"),
            setpoint=TimeSeries(np.full(n, setpoint_c), start, 60, f"{spec.name}.setpoint"),
            outdoor_temp=outdoor_series,
            pv_per_kw=pv_series,
        )

    tou = default_tou_schedule()
    return DistrictDataset(
        name="synthetic-district",
        start=start,
        step_minutes=60,
        steps_per_day=24,
        buildings=buildings,
        tou=tou,
        rate=rate_series_from_tou(tou, start, n, 60),
        carbon=TimeSeries(carbon, start, 60, "carbon"),
        outdoor_temp=outdoor_series,
        pv_per_kw=pv_series,
        split_spec=SplitSpec(train_days=13, test_days=days - 13),
    )


def write_bundled(target: str | Path) -> Path:
    """Regenerate the bundled dataset in ``target`` (deterministic)."""
    return save_district(build_district(), Path(target))


def bundled_path() -> Path:
    """Directory of the dataset shipped inside the package."""
    path = Path(str(resources.files("gridbench").joinpath("data", BUNDLED_NAME)))
    if not (path / "district.toml").is_file():
        raise FileNotFoundError(
            f"bundled dataset missing at {path}; regenerate with write_bundled()"
        )
    return path
