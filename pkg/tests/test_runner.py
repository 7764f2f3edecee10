import dataclasses
import json

import numpy as np
import pytest

from gridbench.agents import NoOpAgent, QLearningAgent, RbcAgent
from gridbench.energy_systems import PvSpec, StorageSpec
from gridbench.outage import ReliabilityParams, generate, save_signal
from gridbench.presets import parse_preset
from gridbench.runner import (
    build_env,
    comfort_stats,
    m_sweep,
    make_agent,
    observation_subset,
    run,
    run_matrix,
    run_rng,
)

from conftest import make_district

BATT = StorageSpec(4.0, 3.3, 3.3, 0.9025, 0.20, 0.0)
TES = StorageSpec(1.7, 3.7, 3.7, 1.0, 0.0, 0.002)


def controlled_district(n_days=4, **kwargs):
    kwargs.setdefault("buildings", ("B1", "B2"))
    kwargs.setdefault("battery", BATT)
    kwargs.setdefault("dhw_storage", TES)
    kwargs.setdefault("pv", PvSpec(1.2))
    kwargs.setdefault("plug", np.full(n_days * 24, 0.5))
    return make_district(n_days, **kwargs)


# ------------------------------------------------------- observation subsets

@pytest.mark.parametrize(
    "preset_id, expected",
    [
        (
            "x-b1_b2-x-x",
            ("hour", "day_of_week", "net_electricity_consumption"),
        ),
        (
            "x-b1_b2-x-pv",
            ("hour", "day_of_week", "net_electricity_consumption"),
        ),
        (
            "rbc-b1-c-bess_pv",
            (
                "hour", "day_of_week", "electricity_rate",
                "net_electricity_consumption", "solar_generation", "battery_soc",
            ),
        ),
        (
            "rbc-b1-e-dhw",
            ("hour", "day_of_week", "carbon_intensity",
             "net_electricity_consumption", "dhw_soc"),
        ),
        (
            "rbc-b1_b2-p-bess_pv",
            ("hour", "day_of_week", "net_electricity_consumption",
             "solar_generation", "battery_soc"),
        ),
        (
            "rlc-b1-d_o-hp",
            ("hour", "day_of_week", "outdoor_temp", "indoor_temp",
             "setpoint", "abs_temp_delta"),
        ),
        (
            "rlc-b1-c-dhw_bess_pv",
            (
                "hour", "day_of_week", "electricity_rate",
                "net_electricity_consumption", "solar_generation",
                "battery_soc", "dhw_soc",
            ),
        ),
    ],
)
def test_observation_subset_per_configuration(preset_id, expected):
    assert observation_subset(parse_preset(preset_id)) == expected


def test_bess_without_pv_exposes_neither_solar_nor_soc():
    config = parse_preset("rlc-b1-c-dhw")
    names = observation_subset(config)
    assert "battery_soc" not in names
    assert "solar_generation" not in names


# --------------------------------------------------------------- environment

def test_build_env_control_flags_follow_devices():
    district = controlled_district()
    config = parse_preset("rbc-b1_b2-p-bess_pv")
    env = build_env(config, district)
    for name in ("B1", "B2"):
        ctrl = env.config.controls[name]
        assert ctrl.has_battery and ctrl.has_pv
        assert not ctrl.has_dhw_storage and not ctrl.control_heat_pump
    assert env.config.observation_names == observation_subset(config)
    assert env.config.reward.kind == "avg_daily_peak"
    assert env.config.outage is None


def test_build_env_stochastic_outage_is_seeded():
    district = controlled_district()
    config = parse_preset("x-b1_b2-x-x", outage_mode="stochastic", outage_seed=42)
    env = build_env(config, district)
    expected = generate(
        ReliabilityParams(saifi_events_per_year=1.5, caidi_hours=2.0, seed=42),
        district.n_steps // 24, 24,
    )
    assert np.array_equal(env.config.outage.active, expected.active)


def test_build_env_static_outage_from_file(tmp_path):
    district = controlled_district()
    active = np.zeros(district.n_steps, dtype=bool)
    active[30:33] = True
    path = tmp_path / "outage.csv"
    save_signal(generate_like(active), path)
    config = parse_preset("x-b1_b2-x-x", outage_mode=f"static:{path}")
    env = build_env(config, district)
    assert np.array_equal(env.config.outage.active, active)


def generate_like(active):
    from gridbench.outage import from_series

    return from_series(active, 24)


def test_build_env_rejects_unknown_outage_mode():
    district = controlled_district()
    config = parse_preset("x-b1_b2-x-x", outage_mode="sometimes")
    with pytest.raises(ValueError, match="outage_mode"):
        build_env(config, district)


def test_run_rng_streams_are_config_keyed():
    a = run_rng(parse_preset("rlc-b1-c-dhw"))
    b = run_rng(parse_preset("rlc-b1-c-dhw"))
    c = run_rng(parse_preset("rlc-b1-e-dhw"))
    draws_a = a.random(5)
    assert np.array_equal(draws_a, b.random(5))
    assert not np.array_equal(draws_a, c.random(5))


# --------------------------------------------------------------------- agents

def test_make_agent_kinds():
    district = controlled_district()
    rng = np.random.default_rng(0)
    env = build_env(parse_preset("x-b1_b2-x-x"), district)
    assert isinstance(make_agent(env, parse_preset("x-b1_b2-x-x"), rng), NoOpAgent)
    config = parse_preset("rbc-b1_b2-p-bess_pv")
    env = build_env(config, district)
    assert isinstance(make_agent(env, config, rng), RbcAgent)
    config = parse_preset("rlc-b1_b2-p-bess_pv", epochs=2)
    env = build_env(config, district)
    agent = make_agent(env, config, rng)
    assert isinstance(agent, QLearningAgent)
    # decay spans the whole training run: epochs * train steps
    assert agent.policy.epsilon.decay_steps == 2 * 48


def test_make_agent_rejects_unknown_kind():
    district = controlled_district()
    config = parse_preset("x-b1_b2-x-x", agent_override="ppo")
    env = build_env(config, district)
    with pytest.raises(ValueError, match="ppo"):
        make_agent(env, config, np.random.default_rng(0))


def test_external_agents_are_centralized_only():
    district = controlled_district()
    config = parse_preset(
        "rbc-b1_b2-p-bess_pv",
        agent_override="external:127.0.0.1:9",
        topology="independent",
    )
    env = build_env(config, district)
    with pytest.raises(ValueError, match="centralized"):
        make_agent(env, config, np.random.default_rng(0))


# ----------------------------------------------------------------------- runs

def test_uncontrolled_run_reports_test_range():
    district = controlled_district(n_days=4, train_days=2)
    result = run(parse_preset("x-b1_b2-x-x"), district)
    assert result.report.range_ == (48, 96)
    assert result.trace.n_steps == 48
    assert result.test_reward == 0.0
    assert result.training_rewards == []
    assert set(result.report.buildings) == {"B1", "B2"}


def test_rbc_run_accumulates_negative_peak_reward():
    district = controlled_district(n_days=4, train_days=2)
    result = run(parse_preset("rbc-b1_b2-p-bess_pv"), district)
    assert result.test_reward < 0.0
    assert result.report.district["avg_daily_peak"] > 0.0


def test_qlearn_run_trains_for_each_epoch():
    district = controlled_district(n_days=4, train_days=2)
    result = run(parse_preset("rlc-b1_b2-p-bess_pv", epochs=3), district)
    assert len(result.training_rewards) == 3
    assert all(np.isfinite(r) for r in result.training_rewards)


def test_fixed_charges_are_opt_in():
    district = dataclasses.replace(
        controlled_district(n_days=4, train_days=2), fixed_charge_per_step=0.01
    )
    base = run(parse_preset("x-b1_b2-x-x"), district)
    charged = run(parse_preset("x-b1_b2-x-x", include_fixed_charges=True), district)
    # two buildings, 48 test steps, 0.01 per building-step
    delta = charged.report.district["cost"] - base.report.district["cost"]
    assert delta == pytest.approx(2 * 48 * 0.01, abs=1e-9)


def test_write_outputs_files(tmp_path):
    district = controlled_district(n_days=4, train_days=2)
    result = run(parse_preset("rlc-b1_b2-p-bess_pv", epochs=2), district, tmp_path)
    for name in ("kpis.json", "kpis.txt", "trace.csv", "daily_peaks.csv",
                 "training_rewards.csv"):
        assert (tmp_path / name).exists(), name
    payload = json.loads((tmp_path / "kpis.json").read_text())
    assert payload["config"] == "rlc-b1_b2-p-bess_pv"
    peaks = (tmp_path / "daily_peaks.csv").read_text().strip().splitlines()
    assert peaks[0] == "day,peak_kw"
    assert len(peaks) == 1 + 2  # header + two test days
    rewards = (tmp_path / "training_rewards.csv").read_text().strip().splitlines()
    assert rewards[0] == "epoch,reward"
    assert len(rewards) == 1 + 2


def test_noop_run_writes_no_training_file(tmp_path):
    district = controlled_district(n_days=4, train_days=2)
    run(parse_preset("x-b1_b2-x-x"), district, tmp_path)
    assert not (tmp_path / "training_rewards.csv").exists()


# --------------------------------------------------------------------- matrix

def test_run_matrix_attaches_baseline_deltas(tmp_path):
    district = controlled_district(n_days=4, train_days=2)
    configs = [
        parse_preset("x-b1_b2-x-x"),
        parse_preset("x-b1_b2-x-pv"),
        parse_preset("rbc-b1_b2-p-bess_pv"),
    ]
    results = run_matrix(configs, district, tmp_path)
    rbc = results[2]
    assert set(rbc.report.baselines) == {"x-b1_b2-x-x", "x-b1_b2-x-pv"}
    assert "district" in rbc.report.baselines["x-b1_b2-x-x"]
    # each baseline is compared against the other one only
    assert set(results[0].report.baselines) == {"x-b1_b2-x-pv"}
    assert set(results[1].report.baselines) == {"x-b1_b2-x-x"}
    for config in configs:
        assert (tmp_path / config.config_id / "kpis.json").exists()
    assert (tmp_path / "summary.txt").exists()


def test_run_matrix_rejects_duplicate_ids():
    district = controlled_district()
    configs = [parse_preset("x-b1_b2-x-x"), parse_preset("x-b1_b2-x-x")]
    with pytest.raises(ValueError, match="duplicate"):
        run_matrix(configs, district)


def test_run_matrix_parallel_matches_serial():
    district = controlled_district(n_days=4, train_days=2)
    configs = [
        parse_preset("x-b1_b2-x-x"),
        parse_preset("x-b1_b2-x-pv"),
        parse_preset("rbc-b1_b2-p-bess_pv"),
        parse_preset("rlc-b1_b2-p-bess_pv", epochs=2),
    ]
    serial = run_matrix(configs, district, workers=1)
    parallel = run_matrix(configs, district, workers=4)
    for s, p in zip(serial, parallel):
        assert s.report.to_json() == p.report.to_json()


# ------------------------------------------------------------------- comfort

def test_comfort_stats_signs():
    # no cooling delivered and a warm exterior: the zone drifts above setpoint
    district = make_district(
        n_days=2, outdoor=np.full(48, 30.0), cooling=np.zeros(48),
    )
    result = run(parse_preset("x-b1-x-x"), district)
    stats = comfort_stats(result.trace)
    assert stats["undercool_steps"] > 0
    assert stats["overcool_steps"] == 0
    assert stats["undercool_mean"] > 0.0
    assert stats["overcool_mean"] == 0.0


def test_m_sweep_requires_comfort_objective():
    district = controlled_district()
    with pytest.raises(ValueError, match="discomfort_consumption"):
        m_sweep(parse_preset("rbc-b1-c-dhw"), district)


def test_m_sweep_rows_and_csv(tmp_path):
    district = make_district(
        n_days=4, train_days=2, outdoor=np.full(96, 32.0),
        cooling=np.full(96, 0.8),
    )
    base = parse_preset("rlc-b1-d_o-hp", epochs=2)
    rows = m_sweep(base, district, m_values=(1.0, 3.0), out_dir=tmp_path)
    assert [row["m"] for row in rows] == [1.0, 3.0]
    assert rows[0]["discomfort_pct"] == 0.0
    assert rows[0]["consumption_pct"] == 0.0
    anchor = rows[0]["discomfort"]
    if anchor != 0:
        expected = (rows[1]["discomfort"] - anchor) / anchor * 100.0
        assert rows[1]["discomfort_pct"] == pytest.approx(expected)
    for key in ("overcool_mean", "undercool_mean", "overcool_steps"):
        assert key in rows[0]
    text = (tmp_path / "m_sweep.csv").read_text().splitlines()
    assert text[0].startswith("m,discomfort,consumption")
    assert len(text) == 3
    assert (tmp_path / "m1" / "kpis.json").exists()
    assert (tmp_path / "m3" / "kpis.json").exists()
