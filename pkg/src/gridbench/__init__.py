"""District-scale building energy flexibility benchmark.

Simulates small districts of buildings with heat pumps, hot water tanks,
batteries, and rooftop PV under time-of-use prices, grid carbon intensity,
and optional outages, then scores control policies on cost, emissions,
consumption, discomfort, peak, and resilience.
"""
from .agents import (
    EpsilonSchedule,
    IndependentAgents,
    NoOpAgent,
    QLearningAgent,
    QPolicy,
    RandomAgent,
    RbcAgent,
    build_q_policy,
    discounted_return,
    q_act,
    q_update,
    rbc_cost_act,
    rbc_emission_act,
    rbc_peak_act,
)
from .dataset import (
    BuildingDataset,
    BuildingSpec,
    DatasetError,
    DistrictDataset,
    SplitSpec,
    TimeSeries,
    TouSchedule,
    default_tou_schedule,
    load_district,
    save_district,
    split,
    tou_rate,
)
from .energy_systems import (
    ElectricHeaterSpec,
    HeatPumpSpec,
    PvSpec,
    StorageSpec,
    StorageState,
    device_step,
    heat_pump_cop,
    pv_output,
    storage_step,
)
from .environment import (
    ACTION_DEVICES,
    OBSERVATION_NAMES,
    BuildingControl,
    EnvConfig,
    Environment,
    EpisodeTrace,
    StepOutcome,
    reset,
)
from .evaluation import KPI_NAMES, KpiReport, RewardSpec, compare, kpi, report_from_trace, reward
from .outage import OutageSignal, ReliabilityParams, generate as generate_outage
from .presets import (
    BASELINE_IDS,
    PRESET_IDS,
    PresetError,
    RunConfig,
    format_preset,
    parse_preset,
)
from .protocol import EpisodeAborted, ExternalAgent, ExternalAgentBridge, ProtocolError
from .runner import RunResult, m_sweep, run, run_matrix
from .synth import build_district, bundled_path
from .thermal import RcModelParams, RecurrentSurrogate, load_surrogate, predict_temperature, rc_step

__version__ = "0.1.0"

__all__ = [
    "ACTION_DEVICES",
    "BASELINE_IDS",
    "BuildingControl",
    "BuildingDataset",
    "BuildingSpec",
    "DatasetError",
    "DistrictDataset",
    "ElectricHeaterSpec",
    "EnvConfig",
    "Environment",
    "EpisodeAborted",
    "EpisodeTrace",
    "EpsilonSchedule",
    "ExternalAgent",
    "ExternalAgentBridge",
    "HeatPumpSpec",
    "IndependentAgents",
    "KPI_NAMES",
    "KpiReport",
    "NoOpAgent",
    "OBSERVATION_NAMES",
    "OutageSignal",
    "PRESET_IDS",
    "PresetError",
    "ProtocolError",
    "PvSpec",
    "QLearningAgent",
    "QPolicy",
    "RandomAgent",
    "RbcAgent",
    "RcModelParams",
    "RecurrentSurrogate",
    "ReliabilityParams",
    "RewardSpec",
    "RunConfig",
    "RunResult",
    "SplitSpec",
    "StepOutcome",
    "StorageSpec",
    "StorageState",
    "TimeSeries",
    "TouSchedule",
    "build_district",
    "build_q_policy",
    "bundled_path",
    "compare",
    "default_tou_schedule",
    "device_step",
    "discounted_return",
    "format_preset",
    "generate_outage",
    "heat_pump_cop",
    "kpi",
    "load_district",
    "load_surrogate",
    "m_sweep",
    "parse_preset",
    "predict_temperature",
    "pv_output",
    "q_act",
    "q_update",
    "rbc_cost_act",
    "rbc_emission_act",
    "rbc_peak_act",
    "rc_step",
    "report_from_trace",
    "reset",
    "reward",
    "run",
    "run_matrix",
    "save_district",
    "split",
    "storage_step",
    "tou_rate",
]
