import datetime

import numpy as np
import pytest

from gridbench.dataset import (
    BuildingDataset,
    BuildingSpec,
    DistrictDataset,
    SplitSpec,
    TimeSeries,
    default_tou_schedule,
    load_district,
    rate_series_from_tou,
)
from gridbench.energy_systems import ElectricHeaterSpec, HeatPumpSpec, PvSpec, StorageSpec
from gridbench.synth import bundled_path
from gridbench.thermal import RcModelParams

START = datetime.datetime(2018, 6, 1)


@pytest.fixture(scope="session")
def bundled():
    return load_district(bundled_path())


def make_district(
    n_days: int = 2,
    *,
    plug=None,
    cooling=None,
    dhw=None,
    pv_per_kw=None,
    outdoor=None,
    setpoint_c: float = 23.5,
    buildings: tuple[str, ...] = ("B1",),
    battery: StorageSpec | None = None,
    dhw_storage: StorageSpec | None = None,
    pv: PvSpec | None = None,
    thermal: RcModelParams | None = None,
    heater: ElectricHeaterSpec | None = None,
    heat_pump: HeatPumpSpec | None = None,
    train_days: int | None = None,
    rate=None,
    carbon=None,
    steps_per_day: int = 24,
) -> DistrictDataset:
    """Small in-memory district with every series defaultable per test."""
    n = n_days * steps_per_day
    step_minutes = 1440 // steps_per_day

    def series(values, fallback, name):
        if values is None:
            values = np.full(n, fallback, dtype=float)
        return TimeSeries(np.asarray(values, dtype=float), START, step_minutes, name)

    outdoor_s = series(outdoor, 30.0, "outdoor")
    pv_s = series(pv_per_kw, 0.0, "pv_per_kw")
    tou = default_tou_schedule()
    rate_s = (
        series(rate, 0.0, "rate")
        if rate is not None
        else rate_series_from_tou(tou, START, n, step_minutes)
    )
    built = {}
    for name in buildings:
        built[name] = BuildingDataset(
            spec=BuildingSpec(
                name=name,
                heat_pump=heat_pump or HeatPumpSpec(nominal_power_kw=2.3),
                dhw_heater=heater or ElectricHeaterSpec(nominal_power_kw=3.7),
                thermal_model=thermal
                or RcModelParams(capacitance_kwh_per_c=3.0, conductance_kw_per_c=0.18),
                dhw_storage=dhw_storage,
                battery=battery,
                pv=pv,
            ),
            cooling_load=series(cooling, 0.0, f"{name}.cooling"),
            dhw_load=series(dhw, 0.0, f"{name}.dhw"),
            plug_load=series(plug, 0.5, f"{name}.plug"),
            setpoint=series(None, setpoint_c, f"{name}.setpoint"),
            outdoor_temp=outdoor_s,
            pv_per_kw=pv_s,
        )
    if train_days is None:
        train_days = max(1, n_days // 2)
    test_days = max(1, n_days - train_days)
    return DistrictDataset(
        name="test-district",
        start=START,
        step_minutes=step_minutes,
        steps_per_day=steps_per_day,
        buildings=built,
        tou=tou,
        rate=rate_s,
        carbon=series(carbon, 0.4, "carbon"),
        outdoor_temp=outdoor_s,
        pv_per_kw=pv_s,
        split_spec=SplitSpec(train_days=train_days, test_days=test_days),
    )


ACCEPTANCE_LABELS = {
    "test_kpi_oracle_equivalence": "KPI oracle equivalence (5 KPIs, 1e-9 rel)",
    "test_reward_oracle_equivalence": "Reward oracle equivalence (1e-12, m-monotone)",
    "test_energy_conservation": "Energy conservation (residual < 1e-6 kWh)",
    "test_outage_statistics": "Outage statistics (events/yr and duration within 5%)",
    "test_storage_safety": "Storage safety (SOC bounds, boundary no-ops)",
    "test_rbc_budget_invariants": "RBC daily budgets (+1 charge / -1 discharge)",
    "test_pv_twenty_percent_analogue": "PV analogue (exact 20.000% KPI drop)",
    "test_peak_rbc_analogue": "Peak-RBC analogue (every day strictly below baseline)",
    "test_qlearning_sanity": "Q-learning sanity (Q* match; greedy >= random median)",
    "test_determinism": "Determinism (byte-identical kpis.json, serial == parallel)",
    "test_external_client_conformance": "Protocol conformance (external client, 1e-12)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.split("::")[-1].split("[")[0]
            label = ACCEPTANCE_LABELS.get(name)
            if label is None:
                continue
            word = {"passed": "PASS", "failed": "FAIL", "error": "FAIL", "skipped": "SKIP"}[status]
            lines.append(f"{word}  {label}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
