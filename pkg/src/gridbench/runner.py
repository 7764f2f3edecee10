"""Run one benchmark configuration end to end, or a whole matrix of them.

A run is: pick the controlled devices and the observation subset, train the
learner on the train range (rule-based and no-op agents skip this), then
score a single greedy episode on the test range and write the KPI report.
Every random draw goes through one generator seeded from (seed, config_id),
so a rerun of the same configuration is bit-for-bit identical and matrix
results do not depend on worker count.
"""
from __future__ import annotations

import dataclasses
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import outage as outage_mod
from .agents import (
    IndependentAgents,
    NoOpAgent,
    QLearningAgent,
    RandomAgent,
    RbcAgent,
    build_q_policy,
)
from .dataset import DistrictDataset, split
from .environment import (
    OBSERVATION_NAMES,
    BuildingControl,
    EnvConfig,
    Environment,
    EpisodeTrace,
)
from .evaluation import KpiReport, compare, report_from_trace
from .presets import BASELINE_IDS, RunConfig
from .protocol import ExternalAgent, ExternalAgentBridge

M_SWEEP_VALUES = (1.0, 3.0, 6.0, 12.0)


def run_rng(config: RunConfig) -> np.random.Generator:
    return np.random.default_rng([config.seed, zlib.crc32(config.config_id.encode())])


def observation_subset(config: RunConfig) -> tuple[str, ...]:
    """The observations a run exposes, in canonical order.

    Calendar fields are always present.  Price and carbon only matter to the
    objectives that price them, storage states only exist with the matching
    devices, and the thermal block only appears when HVAC is on the agent.
    Net consumption is dropped for HVAC comfort runs, where the consumption
    term is already inside the reward.
    """
    hp = "hp" in config.devices
    keep = {"hour", "day_of_week"}
    if config.objective == "cost":
        keep.add("electricity_rate")
    if config.objective == "emissions":
        keep.add("carbon_intensity")
    if not (hp and config.objective == "discomfort_consumption"):
        keep.add("net_electricity_consumption")
    if {"bess", "pv"} <= config.devices:
        keep.update(("solar_generation", "battery_soc"))
    if "dhw" in config.devices:
        keep.add("dhw_soc")
    if hp:
        keep.update(("outdoor_temp", "indoor_temp", "setpoint", "abs_temp_delta"))
    return tuple(o for o in OBSERVATION_NAMES if o in keep)


def build_env(config: RunConfig, dataset: DistrictDataset) -> Environment:
    controls = {
        name: BuildingControl(
            has_dhw_storage="dhw" in config.devices,
            has_battery="bess" in config.devices,
            has_pv="pv" in config.devices,
            control_heat_pump="hp" in config.devices,
        )
        for name in config.buildings
    }
    signal = None
    if config.outage_mode == "stochastic":
        params = outage_mod.ReliabilityParams(
            saifi_events_per_year=config.saifi_events_per_year,
            caidi_hours=config.caidi_hours,
            seed=config.outage_seed,
        )
        signal = outage_mod.generate(
            params, dataset.n_steps // dataset.steps_per_day, dataset.steps_per_day
        )
    elif config.outage_mode.startswith("static:"):
        signal = outage_mod.load_signal(
            config.outage_mode.split(":", 1)[1], dataset.steps_per_day
        )
    elif config.outage_mode != "none":
        raise ValueError(f"unknown outage_mode {config.outage_mode!r}")
    env_config = EnvConfig(
        controls=controls,
        observation_names=observation_subset(config),
        reward=config.reward_spec(),
        topology=config.topology,
        outage=signal,
        futile_penalty=config.futile_penalty,
    )
    return Environment(dataset, env_config)


def make_agent(env: Environment, config: RunConfig, rng: np.random.Generator):
    kind = config.agent_kind
    if kind == "none":
        return NoOpAgent(env)
    if kind == "rbc":
        if config.topology == "independent":
            return IndependentAgents(
                {name: RbcAgent(env, config.objective) for name in env.building_names}
            )
        return RbcAgent(env, config.objective)
    if kind == "random":
        return RandomAgent(env, rng)
    if kind == "qlearn":
        train_range, _ = split(
            env.dataset.n_steps, env.dataset.steps_per_day, env.dataset.split_spec
        )
        decay = max(1, config.epochs * (train_range[1] - train_range[0]))
        if config.topology == "independent":
            return IndependentAgents(
                {
                    name: QLearningAgent(
                        env, build_q_policy(env, building=name, decay_steps=decay), rng
                    )
                    for name in env.building_names
                }
            )
        return QLearningAgent(env, build_q_policy(env, decay_steps=decay), rng)
    if kind.startswith("external:"):
        if config.topology != "centralized":
            raise ValueError("external agents are centralized only")
        host, _, port = kind.removeprefix("external:").rpartition(":")
        bridge = ExternalAgentBridge.listen_tcp(host or "127.0.0.1", int(port))
        return ExternalAgent(env, bridge)
    if kind.startswith("spawn:"):
        if config.topology != "centralized":
            raise ValueError("external agents are centralized only")
        bridge = ExternalAgentBridge.spawn_stdio(kind.removeprefix("spawn:").split())
        return ExternalAgent(env, bridge)
    raise ValueError(f"unknown agent kind {kind!r}")


def run_episode(
    env: Environment,
    agent,
    range_: tuple[int, int],
    *,
    explore: bool,
    seed: int | None = None,
) -> tuple[EpisodeTrace, float]:
    """One full pass over ``range_``; returns the trace and the reward sum."""
    independent = env.config.topology == "independent"
    observations = env.reset(range_, seed)
    total = 0.0
    done = False
    while not done:
        actions = agent.act(observations, explore=explore)
        outcome = env.step(actions)
        if independent:
            step_reward = sum(outcome.rewards.values())
            agent.update(outcome.rewards, outcome.observations, outcome.done)
        else:
            step_reward = outcome.rewards.get("central", 0.0)
            agent.update(step_reward, outcome.observations, outcome.done)
        total += step_reward
        observations = outcome.observations
        done = outcome.done
    return env.trace(), total


@dataclass
class RunResult:
    config: RunConfig
    report: KpiReport
    trace: EpisodeTrace
    test_reward: float
    training_rewards: list[float] = field(default_factory=list)
    agent: object | None = None
    out_dir: Path | None = None


def run(config: RunConfig, dataset: DistrictDataset, out_dir: str | Path | None = None) -> RunResult:
    env = build_env(config, dataset)
    rng = run_rng(config)
    agent = make_agent(env, config, rng)
    train_range, test_range = split(dataset.n_steps, dataset.steps_per_day, dataset.split_spec)

    training_rewards: list[float] = []
    if config.agent_kind == "qlearn":
        for _ in range(config.epochs):
            _, epoch_reward = run_episode(env, agent, train_range, explore=True, seed=config.seed)
            training_rewards.append(epoch_reward)

    trace, test_reward = run_episode(env, agent, test_range, explore=False, seed=config.seed)
    if not config.include_fixed_charges and trace.fixed_charge_per_step:
        trace = dataclasses.replace(trace, fixed_charge_per_step=0.0)
    report = report_from_trace(trace, config.config_id, config.seed)
    if isinstance(agent, ExternalAgent):
        agent.finish(report.to_dict())

    result = RunResult(
        config=config,
        report=report,
        trace=trace,
        test_reward=test_reward,
        training_rewards=training_rewards,
        agent=agent,
    )
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_outputs(result: RunResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kpis.json").write_text(result.report.to_json())
    (out / "kpis.txt").write_text(result.report.to_text())
    result.trace.to_csv(out / "trace.csv")
    peaks = result.trace.daily_peaks_kw()
    lines = ["day,peak_kw"]
    lines += [f"{day},{repr(float(p))}" for day, p in enumerate(peaks)]
    (out / "daily_peaks.csv").write_text("\n".join(lines) + "\n")
    if result.training_rewards:
        lines = ["epoch,reward"]
        lines += [f"{e},{repr(float(r))}" for e, r in enumerate(result.training_rewards)]
        (out / "training_rewards.csv").write_text("\n".join(lines) + "\n")
    result.out_dir = out
    return out


def run_matrix(
    configs: list[RunConfig],
    dataset: DistrictDataset,
    out_root: str | Path | None = None,
    workers: int = 1,
) -> list[RunResult]:
    """Run every configuration, then attach percent deltas vs the baselines.

    Worker count only changes wall time: each run owns its generator, and
    comparisons happen after the pool drains, in the order given.
    """
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate config ids in matrix")
    if workers <= 1:
        results = [run(c, dataset) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run(c, dataset), configs))
    by_id = {r.config.config_id: r for r in results}
    for result in results:
        for baseline_id in BASELINE_IDS:
            if baseline_id in by_id and baseline_id != result.config.config_id:
                compare(result.report, by_id[baseline_id].report)
    if out_root is not None:
        root = Path(out_root)
        for result in results:
            write_outputs(result, root / result.config.config_id)
        summary = "".join(r.report.to_text() + "\n" for r in results)
        (root / "summary.txt").write_text(summary)
    return results


def comfort_stats(trace: EpisodeTrace) -> dict[str, float]:
    """Mean/std of setpoint misses, split by sign, pooled over buildings."""
    deltas = np.concatenate(
        [b.indoor_c - b.setpoint_c for b in trace.buildings.values()]
    )
    over = deltas[deltas < 0]  # cooled below setpoint
    under = deltas[deltas > 0]  # left above setpoint
    def stats(x: np.ndarray) -> tuple[float, float]:
        if x.size == 0:
            return 0.0, 0.0
        return float(np.mean(np.abs(x))), float(np.std(np.abs(x)))
    over_mean, over_std = stats(over)
    under_mean, under_std = stats(under)
    return {
        "overcool_mean": over_mean,
        "overcool_std": over_std,
        "overcool_steps": int(over.size),
        "undercool_mean": under_mean,
        "undercool_std": under_std,
        "undercool_steps": int(under.size),
    }


def m_sweep(
    base_config: RunConfig,
    dataset: DistrictDataset,
    m_values: tuple[float, ...] = M_SWEEP_VALUES,
    out_dir: str | Path | None = None,
) -> list[dict]:
    """Rerun one comfort-weighted configuration across undercooling weights.

    The first value anchors the percent columns (weight 1 reduces the reward
    to plain discomfort plus consumption).
    """
    if base_config.objective != "discomfort_consumption":
        raise ValueError("m sweep requires a discomfort_consumption objective")
    rows: list[dict] = []
    anchor: dict | None = None
    for m in m_values:
        config = dataclasses.replace(base_config, m=float(m))
        result = run(config, dataset, None if out_dir is None else Path(out_dir) / f"m{m:g}")
        row = {
            "m": float(m),
            "discomfort": result.report.district["discomfort"],
            "consumption": result.report.district["consumption"],
        }
        row.update(comfort_stats(result.trace))
        if anchor is None:
            anchor = row
            row["discomfort_pct"] = 0.0
            row["consumption_pct"] = 0.0
        else:
            for k in ("discomfort", "consumption"):
                base = anchor[k]
                row[f"{k}_pct"] = 0.0 if base == 0 else (row[k] - base) / base * 100.0
        rows.append(row)
    if out_dir is not None:
        cols = list(rows[0])
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join(repr(float(row[c])) for c in cols))
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "m_sweep.csv").write_text("\n".join(lines) + "\n")
    return rows
