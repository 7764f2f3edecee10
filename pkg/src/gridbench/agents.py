"""Controllers: rule-based storage schedules, tabular Q-learning, baselines.

The three RBC schedules move a fixed daily energy budget: charge fractions
over a day sum to +1 and discharge fractions to -1, so the tank or battery
cycles once per day.  Q-learning discretizes observations into bins and keeps
a sparse table keyed by the bin tuple.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .energy_systems import heat_pump_cop
from .environment import Environment

N_BINS_DEFAULT = 8
N_ACTION_LEVELS_DEFAULT = 5


# ------------------------------------------------------------------ RBC rules

def rbc_cost_act(hour: int, day_type: str) -> float:
    """Storage action for the tariff-driven schedule.

    Weekdays charge through the nine off-peak hours (10 PM to 7 AM), push half
    the budget out across the three on-peak hours (3 PM to 6 PM) and spread
    the rest uniformly over the remaining twelve hours.  Weekends trickle
    charge all day.
    """
    if day_type == "weekend":
        return 1.0 / 24.0
    if hour >= 22 or hour < 7:
        return 1.0 / 9.0
    if 15 <= hour < 18:
        return -0.5 / 3.0
    return -0.5 / 12.0


def rbc_emission_act(hour: int, day_type: str = "weekday") -> float:
    """Charge before 8 AM when intensity is low, discharge noon to 11 PM."""
    if hour < 8:
        return 1.0 / 8.0
    if 12 <= hour < 23:
        return -1.0 / 11.0
    return 0.0


def rbc_peak_act(hour: int, day_type: str = "weekday") -> float:
    """Charge overnight (to 6 AM), shave the long daytime block to 11 PM."""
    if hour < 6:
        return 1.0 / 6.0
    if 6 <= hour < 23:
        return -1.0 / 17.0
    return 0.0


RBC_RULES = {
    "cost": rbc_cost_act,
    "emissions": rbc_emission_act,
    "avg_daily_peak": rbc_peak_act,
}


def _calendar_from(observations: Mapping) -> tuple[int, int]:
    """Pull (hour, day_of_week) out of a flat or per-building observation dict."""
    sample = observations
    if observations and isinstance(next(iter(observations.values())), Mapping):
        sample = next(iter(observations.values()))
    try:
        return int(sample["hour"]), int(sample["day_of_week"])
    except KeyError:
        raise ValueError("observations lack hour/day_of_week") from None


class RbcAgent:
    """Applies one hour-indexed rule to every controlled storage device."""

    def __init__(self, env: Environment, objective: str):
        if objective not in RBC_RULES:
            raise ValueError(
                f"no rule-based schedule for objective {objective!r}; "
                f"choose from {sorted(RBC_RULES)}"
            )
        for building, device in env.action_slots():
            if device == "heat_pump":
                raise ValueError(f"rule-based control does not drive heat pumps ({building})")
        self.env = env
        self.rule = RBC_RULES[objective]

    def act(self, observations, explore: bool = False):
        hour, dow = _calendar_from(observations)
        day_type = "weekend" if dow in (6, 7) else "weekday"
        value = self.rule(hour, day_type)
        actions: dict[str, dict[str, float]] = {}
        for building, device in self.env.action_slots():
            actions.setdefault(building, {})[device] = value
        return actions

    def update(self, reward_value: float, next_observations, done: bool) -> None:
        pass


class NoOpAgent:
    def __init__(self, env: Environment):
        self.env = env

    def act(self, observations, explore: bool = False):
        return {}

    def update(self, reward_value: float, next_observations, done: bool) -> None:
        pass


class RandomAgent:
    """Uniform actions over each slot's range; seeded."""

    def __init__(self, env: Environment, rng: np.random.Generator):
        self.env = env
        self.rng = rng

    def act(self, observations, explore: bool = False):
        actions: dict[str, dict[str, float]] = {}
        for building, device in self.env.action_slots():
            lo, hi = (0.0, 1.0) if device == "heat_pump" else (-1.0, 1.0)
            actions.setdefault(building, {})[device] = float(self.rng.uniform(lo, hi))
        return actions

    def update(self, reward_value: float, next_observations, done: bool) -> None:
        pass


# ------------------------------------------------------------- Q-learning

@dataclass
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 1

    def value(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / self.decay_steps)


@dataclass
class QPolicy:
    """Sparse tabular policy over binned observations and gridded actions.

    ``bin_edges[name]`` holds interior edges for a continuous observation or
    None for integer-coded ones (hour, day_of_week).  ``action_slots`` pairs
    each flat ``building.device`` name with its level grid; cells enumerate
    the cartesian product of levels in slot order.
    """

    observation_names: list[str]
    bin_edges: dict[str, np.ndarray | None]
    action_slots: list[str]
    action_levels: list[np.ndarray]
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    table: dict[tuple, np.ndarray] = field(default_factory=dict)
    train_steps: int = 0

    @property
    def n_cells(self) -> int:
        n = 1
        for levels in self.action_levels:
            n *= len(levels)
        return n

    def state_key(self, observations: Mapping[str, float]) -> tuple:
        key = []
        for name in self.observation_names:
            if name not in observations:
                raise ValueError(f"observation {name!r} missing from vector")
            value = observations[name]
            edges = self.bin_edges[name]
            if edges is None:
                key.append(int(value))
            else:
                key.append(int(np.searchsorted(edges, value, side="right")))
        return tuple(key)

    def q_values(self, key: tuple) -> np.ndarray:
        row = self.table.get(key)
        if row is None:
            row = np.zeros(self.n_cells)
            self.table[key] = row
        return row

    def decode_cell(self, cell: int) -> dict[str, dict[str, float]]:
        actions: dict[str, dict[str, float]] = {}
        for slot, levels in zip(reversed(self.action_slots), reversed(self.action_levels)):
            cell, idx = divmod(cell, len(levels))
            building, device = slot.split(".", 1)
            actions.setdefault(building, {})[device] = float(levels[idx])
        return actions


def uniform_bins(lo: float, hi: float, n_bins: int = N_BINS_DEFAULT) -> np.ndarray:
    """Interior edges of ``n_bins`` uniform bins; a degenerate range gives one bin."""
    if hi <= lo:
        return np.empty(0)
    return np.linspace(lo, hi, n_bins + 1)[1:-1]


def q_select_cell(policy: QPolicy, key: tuple, explore: bool, rng: np.random.Generator) -> int:
    """Epsilon-greedy cell choice; greedy ties break to the lowest index."""
    if explore and rng.random() < policy.epsilon.value(policy.train_steps):
        return int(rng.integers(policy.n_cells))
    return int(np.argmax(policy.q_values(key)))


def q_act(
    policy: QPolicy,
    observations: Mapping[str, float],
    explore: bool,
    rng: np.random.Generator,
) -> dict[str, dict[str, float]]:
    return policy.decode_cell(q_select_cell(policy, policy.state_key(observations), explore, rng))


def q_update(
    policy: QPolicy,
    state_key: tuple,
    cell: int,
    reward_value: float,
    next_key: tuple | None,
) -> QPolicy:
    """One tabular backup; ``next_key`` of None marks a terminal transition."""
    row = policy.q_values(state_key)
    target = reward_value
    if next_key is not None:
        target += policy.gamma * float(np.max(policy.q_values(next_key)))
    row[cell] += policy.alpha * (target - row[cell])
    return policy


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    total = 0.0
    factor = 1.0
    for r in rewards:
        total += factor * float(r)
        factor *= gamma
    return total


class QLearningAgent:
    """Owns a QPolicy plus the rng and the last (state, cell) for updates."""

    def __init__(self, env: Environment, policy: QPolicy, rng: np.random.Generator):
        self.env = env
        self.policy = policy
        self.rng = rng
        self._last: tuple[tuple, int] | None = None

    def act(self, observations, explore: bool = False):
        key = self.policy.state_key(observations)
        cell = q_select_cell(self.policy, key, explore, self.rng)
        self._last = (key, cell)
        return self.policy.decode_cell(cell)

    def update(self, reward_value: float, next_observations, done: bool) -> None:
        if self._last is None:
            return
        key, cell = self._last
        next_key = None if done else self.policy.state_key(next_observations)
        q_update(self.policy, key, cell, reward_value, next_key)
        self.policy.train_steps += 1


class IndependentAgents:
    """One agent per building; merges actions and routes per-building rewards."""

    def __init__(self, agents: dict[str, object]):
        self.agents = agents

    def act(self, observations, explore: bool = False):
        merged: dict[str, dict[str, float]] = {}
        for building, agent in self.agents.items():
            for b, devices in agent.act(observations[building], explore).items():
                merged.setdefault(b, {}).update(devices)
        return merged

    def update(self, rewards: Mapping[str, float], next_observations, done: bool) -> None:
        for building, agent in self.agents.items():
            agent.update(rewards[building], next_observations[building], done)


def build_q_policy(
    env: Environment,
    *,
    building: str | None = None,
    n_bins: int = N_BINS_DEFAULT,
    n_action_levels: int = N_ACTION_LEVELS_DEFAULT,
    alpha: float = 0.1,
    gamma: float = 0.99,
    decay_steps: int = 1,
) -> QPolicy:
    """Bin every active observation from dataset-derived ranges.

    With ``building`` set, the policy covers that building's own vector and
    action slots (independent topology); otherwise the flat centralized ones.
    """
    from .environment import DISTRICT_OBSERVATIONS

    dataset = env.dataset
    if building is None:
        names = env.observation_names_flat()
        slot_pairs = env.action_slots()
    else:
        names = [o for o in DISTRICT_OBSERVATIONS if o in env.config.observation_names]
        names += env.active_building_observations(building)
        slot_pairs = [(b, d) for b, d in env.action_slots() if b == building]
    edges: dict[str, np.ndarray | None] = {}
    for name in names:
        scoped = name.rsplit(".", 1)
        base = scoped[-1]
        owner = scoped[0] if len(scoped) == 2 else building
        if base in ("hour", "day_of_week"):
            edges[name] = None
            continue
        if base == "electricity_rate":
            lo, hi = float(dataset.rate.values.min()), float(dataset.rate.values.max())
        elif base == "carbon_intensity":
            lo, hi = float(dataset.carbon.values.min()), float(dataset.carbon.values.max())
        elif base == "outdoor_temp":
            lo = float(dataset.outdoor_temp.values.min())
            hi = float(dataset.outdoor_temp.values.max())
        elif base in ("battery_soc", "dhw_soc"):
            lo, hi = 0.0, 1.0
        elif base == "solar_generation":
            spec = dataset.buildings[owner].spec
            lo, hi = 0.0, spec.pv.nominal_power_kw * float(dataset.pv_per_kw.values.max())
        elif base == "net_electricity_consumption":
            lo, hi = _net_consumption_bounds(env, owner)
        elif base in ("indoor_temp", "setpoint"):
            bld = dataset.buildings[owner]
            lo = min(float(bld.setpoint.values.min()), float(dataset.outdoor_temp.values.min())) - 5.0
            hi = max(float(bld.setpoint.values.max()), float(dataset.outdoor_temp.values.max())) + 5.0
        elif base == "abs_temp_delta":
            lo, hi = 0.0, 10.0
        else:
            raise ValueError(f"no binning rule for observation {name!r}")
        edges[name] = uniform_bins(lo, hi, n_bins)
    levels = [
        np.linspace(0.0, 1.0, n_action_levels)
        if device == "heat_pump"
        else np.linspace(-1.0, 1.0, n_action_levels)
        for _, device in slot_pairs
    ]
    return QPolicy(
        observation_names=names,
        bin_edges=edges,
        action_slots=[f"{b}.{d}" for b, d in slot_pairs],
        action_levels=levels,
        alpha=alpha,
        gamma=gamma,
        epsilon=EpsilonSchedule(decay_steps=decay_steps),
    )


def _net_consumption_bounds(env: Environment, building: str) -> tuple[float, float]:
    """Generous static range for net consumption, from loads and device sizes."""
    bld = env.dataset.buildings[building]
    spec = bld.spec
    ctrl = env.config.controls[building]
    cops = np.array(
        [heat_pump_cop(spec.heat_pump, float(x)) for x in env.dataset.outdoor_temp.values]
    )
    base = (
        bld.cooling_load.values / cops
        + bld.dhw_load.values / spec.dhw_heater.efficiency
        + bld.plug_load.values
    )
    hi = float(base.max())
    lo = 0.0
    if ctrl.has_battery:
        hi += spec.battery.max_charge_power_kw * env.dataset.dt_hours
    if ctrl.has_dhw_storage:
        hi += spec.dhw_heater.nominal_power_kw * env.dataset.dt_hours
    if ctrl.has_pv:
        lo = -spec.pv.nominal_power_kw * float(env.dataset.pv_per_kw.values.max())
    return lo, hi
