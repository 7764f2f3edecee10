"""Indoor temperature dynamics: a 1R1C model and a recurrent surrogate.

The surrogate is a single-layer gated recursion (four gates, sigmoid/tanh)
loaded from a versioned JSON weights file.  Inputs are min-max normalized per
feature; the scalar head passes through a sigmoid before denormalization, so
predictions are always inside the stored output bounds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SURROGATE_SCHEMA = "recurrent-dynamics-v1"

# Feature names the environment knows how to assemble into a window.
SUPPORTED_FEATURES = (
    "indoor_temp_c",
    "delivered_cooling_kwh",
    "outdoor_temp_c",
    "hour_of_day",
    "day_of_week",
    "hour_sin",
    "hour_cos",
)


@dataclass(frozen=True)
class RcModelParams:
    """Lumped 1R1C zone: one capacitance, one conductance to ambient."""

    capacitance_kwh_per_c: float
    conductance_kw_per_c: float
    internal_gain_kw: float = 0.0

    def __post_init__(self) -> None:
        if self.capacitance_kwh_per_c <= 0:
            raise ValueError("capacitance_kwh_per_c must be positive")
        if self.conductance_kw_per_c < 0:
            raise ValueError("conductance_kw_per_c must be >= 0")


def rc_step(
    params: RcModelParams,
    indoor_temp_c: float,
    outdoor_temp_c: float,
    delivered_cooling_kwh: float,
    dt_hours: float,
) -> float:
    """Advance the zone one step; delivered cooling removes heat."""
    if dt_hours <= 0:
        raise ValueError("dt_hours must be positive")
    net_kw = (
        params.conductance_kw_per_c * (outdoor_temp_c - indoor_temp_c)
        + params.internal_gain_kw
        - delivered_cooling_kwh / dt_hours
    )
    return indoor_temp_c + dt_hours * net_kw / params.capacitance_kwh_per_c


@dataclass(frozen=True)
class DynamicsInputWindow:
    """Lookback window of raw-unit features, shape (lookback, n_features)."""

    features: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "features", arr)
        if arr.ndim != 2:
            raise ValueError("window must be 2-D (lookback, features)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("window contains non-finite values")


@dataclass(frozen=True)
class RecurrentSurrogate:
    """Weights and normalization bounds for the gated recursion.

    Gate blocks are stacked row-major in the order input, forget, candidate,
    output: ``w_input`` is (4H, F), ``w_recurrent`` is (4H, H), ``bias`` is
    (4H,).  The head maps the final hidden state to one normalized output.
    """

    features: tuple[str, ...]
    lookback: int
    hidden_size: int
    input_min: np.ndarray
    input_max: np.ndarray
    output_min: float
    output_max: float
    w_input: np.ndarray
    w_recurrent: np.ndarray
    bias: np.ndarray
    head_weight: np.ndarray
    head_bias: float

    def __post_init__(self) -> None:
        h, f = self.hidden_size, len(self.features)
        checks = {
            "input_min": (self.input_min, (f,)),
            "input_max": (self.input_max, (f,)),
            "w_input": (self.w_input, (4 * h, f)),
            "w_recurrent": (self.w_recurrent, (4 * h, h)),
            "bias": (self.bias, (4 * h,)),
            "head_weight": (self.head_weight, (h,)),
        }
        for name, (arr, shape) in checks.items():
            arr = np.asarray(arr, dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if self.lookback <= 0:
            raise ValueError("lookback must be positive")
        if not math.isfinite(self.output_min) or not math.isfinite(self.output_max):
            raise ValueError("output bounds must be finite")
        if self.output_max <= self.output_min:
            raise ValueError("output_max must exceed output_min")
        if np.any(self.input_max <= self.input_min):
            raise ValueError("each input_max must exceed its input_min")


def load_surrogate(path: str | Path) -> RecurrentSurrogate:
    """Load and validate a weights file; raises ValueError on any mismatch."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    schema = raw.get("schema")
    if schema != SURROGATE_SCHEMA:
        raise ValueError(f"{path}: unsupported schema {schema!r}, expected {SURROGATE_SCHEMA!r}")
    try:
        model = RecurrentSurrogate(
            features=tuple(raw["features"]),
            lookback=int(raw["lookback"]),
            hidden_size=int(raw["hidden_size"]),
            input_min=np.asarray(raw["input_min"], dtype=float),
            input_max=np.asarray(raw["input_max"], dtype=float),
            output_min=float(raw["output_min"]),
            output_max=float(raw["output_max"]),
            w_input=np.asarray(raw["w_input"], dtype=float),
            w_recurrent=np.asarray(raw["w_recurrent"], dtype=float),
            bias=np.asarray(raw["bias"], dtype=float),
            head_weight=np.asarray(raw["head_weight"], dtype=float),
            head_bias=float(raw["head_bias"]),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    unknown = [f for f in model.features if f not in SUPPORTED_FEATURES]
    if unknown:
        raise ValueError(f"{path}: unsupported features {unknown}")
    return model


def save_surrogate(model: RecurrentSurrogate, path: str | Path) -> None:
    payload = {
        "schema": SURROGATE_SCHEMA,
        "features": list(model.features),
        "lookback": model.lookback,
        "hidden_size": model.hidden_size,
        "input_min": model.input_min.tolist(),
        "input_max": model.input_max.tolist(),
        "output_min": model.output_min,
        "output_max": model.output_max,
        "w_input": model.w_input.tolist(),
        "w_recurrent": model.w_recurrent.tolist(),
        "bias": model.bias.tolist(),
        "head_weight": model.head_weight.tolist(),
        "head_bias": model.head_bias,
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def predict_temperature(model: RecurrentSurrogate, window: DynamicsInputWindow) -> float:
    """One temperature prediction from a lookback window of raw features."""
    x = window.features
    if x.shape != (model.lookback, len(model.features)):
        raise ValueError(
            f"window shape {x.shape} does not match (lookback={model.lookback}, "
            f"features={len(model.features)})"
        )
    span = model.input_max - model.input_min
    normalized = (x - model.input_min) / span
    h = model.hidden_size
    hidden = np.zeros(h)
    cell = np.zeros(h)
    for t in range(model.lookback):
        gates = model.w_input @ normalized[t] + model.w_recurrent @ hidden + model.bias
        i = _sigmoid(gates[0:h])
        f = _sigmoid(gates[h : 2 * h])
        g = np.tanh(gates[2 * h : 3 * h])
        o = _sigmoid(gates[3 * h : 4 * h])
        cell = f * cell + i * g
        hidden = o * np.tanh(cell)
    y = _sigmoid(np.array([float(model.head_weight @ hidden) + model.head_bias]))[0]
    return model.output_min + y * (model.output_max - model.output_min)
