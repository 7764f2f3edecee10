"""District input data: time series, tariffs, building specs, train/test split.

A district lives in a directory with a ``district.toml`` manifest next to one
CSV per building plus shared weather and carbon files.  Everything is loaded
eagerly and validated; simulation code downstream assumes aligned, finite
series.
"""
from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .energy_systems import (
    BATTERY_DEFAULTS,
    THERMAL_STORAGE_DEFAULTS,
    ElectricHeaterSpec,
    HeatPumpSpec,
    PvSpec,
    StorageSpec,
)
from .thermal import RcModelParams

WEEKEND_ISO_DAYS = (6, 7)


class DatasetError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class TimeSeries:
    """A regularly sampled series anchored to a calendar start."""

    values: np.ndarray
    start: datetime.datetime
    step_minutes: int
    name: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise DatasetError(f"series {self.name!r} must be 1-D and non-empty")
        if self.step_minutes <= 0:
            raise DatasetError(f"series {self.name!r} has step_minutes <= 0")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DatasetError(f"series {self.name!r} has non-finite value at index {bad}")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class TouBand:
    start_hour: int
    end_hour: int
    rate: float
    tier: str = ""

    def contains(self, hour: int) -> bool:
        # bands may wrap midnight, e.g. 22 -> 7
        if self.start_hour < self.end_hour:
            return self.start_hour <= hour < self.end_hour
        return hour >= self.start_hour or hour < self.end_hour


@dataclass(frozen=True)
class TouSchedule:
    """Weekday time-of-use bands plus a flat weekend rate."""

    weekday_bands: tuple[TouBand, ...]
    weekend_rate: float

    def __post_init__(self) -> None:
        if self.weekend_rate <= 0:
            raise DatasetError("weekend rate must be positive")
        cover = [0] * 24
        for band in self.weekday_bands:
            if not (0 <= band.start_hour < 24 and 0 <= band.end_hour < 24):
                raise DatasetError(f"band hours out of range: {band}")
            if band.rate <= 0:
                raise DatasetError(f"band rate must be positive: {band}")
            for hour in range(24):
                if band.contains(hour):
                    cover[hour] += 1
        missing = [h for h, c in enumerate(cover) if c == 0]
        doubled = [h for h, c in enumerate(cover) if c > 1]
        if missing or doubled:
            raise DatasetError(
                f"weekday bands must cover each hour exactly once "
                f"(uncovered {missing}, overlapping {doubled})"
            )


def tou_rate(schedule: TouSchedule, day_type: str, hour: int) -> float:
    """Rate in $/kWh for a calendar hour; ``day_type`` is weekday or weekend."""
    if not 0 <= hour < 24:
        raise ValueError(f"hour {hour} out of range")
    if day_type == "weekend":
        return schedule.weekend_rate
    if day_type != "weekday":
        raise ValueError(f"unknown day type {day_type!r}")
    for band in schedule.weekday_bands:
        if band.contains(hour):
            return band.rate
    raise ValueError(f"no band covers hour {hour}")  # unreachable on a valid schedule


def default_tou_schedule() -> TouSchedule:
    """Three-tier summer weekday schedule with a flat weekend rate."""
    return TouSchedule(
        weekday_bands=(
            TouBand(7, 15, 0.0291, "mid_peak"),
            TouBand(15, 18, 0.0587, "on_peak"),
            TouBand(18, 22, 0.0291, "mid_peak"),
            TouBand(22, 7, 0.0289, "off_peak"),
        ),
        weekend_rate=0.0289,
    )


@dataclass(frozen=True)
class SplitSpec:
    train_days: int
    test_days: int

    def __post_init__(self) -> None:
        if self.train_days <= 0 or self.test_days <= 0:
            raise DatasetError("split day counts must be positive")


def split(
    n_steps: int, steps_per_day: int, spec: SplitSpec
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Contiguous (train, test) step ranges covering the horizon exactly."""
    if n_steps % steps_per_day != 0:
        raise DatasetError(f"{n_steps} steps is not a whole number of {steps_per_day}-step days")
    total_days = n_steps // steps_per_day
    if spec.train_days + spec.test_days != total_days:
        raise DatasetError(
            f"split {spec.train_days}+{spec.test_days} days does not cover {total_days} days"
        )
    boundary = spec.train_days * steps_per_day
    return (0, boundary), (boundary, n_steps)


@dataclass(frozen=True)
class BuildingSpec:
    """Device fleet and thermal model of one building."""

    name: str
    heat_pump: HeatPumpSpec
    dhw_heater: ElectricHeaterSpec
    thermal_model: RcModelParams
    dhw_storage: StorageSpec | None = None
    battery: StorageSpec | None = None
    pv: PvSpec | None = None
    surrogate_file: str | None = None


@dataclass(frozen=True)
class BuildingDataset:
    """Per-building demand series plus references to the shared weather."""

    spec: BuildingSpec
    cooling_load: TimeSeries
    dhw_load: TimeSeries
    plug_load: TimeSeries
    setpoint: TimeSeries
    outdoor_temp: TimeSeries
    pv_per_kw: TimeSeries


@dataclass(frozen=True)
class DistrictDataset:
    name: str
    start: datetime.datetime
    step_minutes: int
    steps_per_day: int
    buildings: dict[str, BuildingDataset]
    tou: TouSchedule | None
    rate: TimeSeries
    carbon: TimeSeries
    outdoor_temp: TimeSeries
    pv_per_kw: TimeSeries
    split_spec: SplitSpec
    fixed_charge_per_step: float = 0.0
    root: Path | None = None

    @property
    def n_steps(self) -> int:
        return len(self.rate)

    @property
    def dt_hours(self) -> float:
        return self.step_minutes / 60.0

    def timestamp(self, step: int) -> datetime.datetime:
        return self.start + datetime.timedelta(minutes=step * self.step_minutes)

    def hour_of(self, step: int) -> int:
        return self.timestamp(step).hour

    def day_of_week(self, step: int) -> int:
        """ISO day of week, Monday=1 .. Sunday=7."""
        return self.timestamp(step).isoweekday()

    def day_type(self, step: int) -> str:
        return "weekend" if self.day_of_week(step) in WEEKEND_ISO_DAYS else "weekday"

    def ranges(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return split(self.n_steps, self.steps_per_day, self.split_spec)

    def __post_init__(self) -> None:
        if self.n_steps % self.steps_per_day != 0:
            raise DatasetError("horizon is not a whole number of days")
        expected = {
            "rate": self.rate,
            "carbon": self.carbon,
            "outdoor_temp": self.outdoor_temp,
            "pv_per_kw": self.pv_per_kw,
        }
        for bld in self.buildings.values():
            expected[f"{bld.spec.name}.cooling_load"] = bld.cooling_load
            expected[f"{bld.spec.name}.dhw_load"] = bld.dhw_load
            expected[f"{bld.spec.name}.plug_load"] = bld.plug_load
            expected[f"{bld.spec.name}.setpoint"] = bld.setpoint
        for label, series in expected.items():
            if len(series) != self.n_steps:
                raise DatasetError(
                    f"series {label} has {len(series)} steps, district has {self.n_steps}"
                )
            if series.step_minutes != self.step_minutes or series.start != self.start:
                raise DatasetError(f"series {label} is not aligned with the district calendar")
        if np.any(self.carbon.values < 0):
            raise DatasetError("carbon intensity must be non-negative")
        if np.any(self.rate.values < 0):
            raise DatasetError("electricity rate must be non-negative")


def rate_series_from_tou(
    schedule: TouSchedule,
    start: datetime.datetime,
    n_steps: int,
    step_minutes: int,
) -> TimeSeries:
    """Expand a TOU schedule into a per-step rate series over the calendar."""
    values = np.empty(n_steps, dtype=float)
    for t in range(n_steps):
        stamp = start + datetime.timedelta(minutes=t * step_minutes)
        day_type = "weekend" if stamp.isoweekday() in WEEKEND_ISO_DAYS else "weekday"
        values[t] = tou_rate(schedule, day_type, stamp.hour)
    return TimeSeries(values, start, step_minutes, "rate")


# ---------------------------------------------------------------- CSV loading

def _read_csv_columns(
    path: Path,
    columns: Sequence[str],
    *,
    non_negative: Sequence[str] = (),
) -> dict[str, np.ndarray]:
    """Read named float columns, reporting file/row/column on any bad cell."""
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DatasetError(f"{path}: cannot open ({exc})") from exc
    with handle:
        reader = csv.DictReader(row for row in handle if not row.startswith("#"))
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: empty file")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        out: dict[str, list[float]] = {c: [] for c in columns}
        for row_index, row in enumerate(reader, start=1):
            for column in columns:
                cell = row.get(column)
                if cell is None or cell == "":
                    raise DatasetError(f"{path}: row {row_index}: empty cell in {column}")
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {row_index}: {column} is not a number ({cell!r})"
                    ) from None
                if not math.isfinite(value):
                    raise DatasetError(f"{path}: row {row_index}: {column} is not finite")
                if column in non_negative and value < 0:
                    raise DatasetError(
                        f"{path}: row {row_index}: {column} must be non-negative, got {value}"
                    )
                out[column].append(value)
    if not out[columns[0]]:
        raise DatasetError(f"{path}: no data rows")
    return {c: np.asarray(v, dtype=float) for c, v in out.items()}


def _device_spec(table: Mapping | None, cls, defaults: Mapping, context: str):
    if table is None:
        return None
    merged = dict(defaults)
    merged.update(table)
    try:
        return cls(**merged)
    except TypeError as exc:
        raise DatasetError(f"{context}: {exc}") from exc
    except ValueError as exc:
        raise DatasetError(f"{context}: {exc}") from exc


def _require(table: Mapping, key: str, context: str):
    if key not in table:
        raise DatasetError(f"{context}: missing required key {key!r}")
    return table[key]


def load_district(path: str | Path) -> DistrictDataset:
    """Load and validate a district directory (``district.toml`` + CSVs)."""
    root = Path(path)
    manifest_path = root / "district.toml"
    if not manifest_path.is_file():
        raise DatasetError(f"{manifest_path}: manifest not found")
    try:
        manifest = tomllib.loads(manifest_path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise DatasetError(f"{manifest_path}: {exc}") from exc

    context = str(manifest_path)
    start = _require(manifest, "start", context)
    if isinstance(start, datetime.date) and not isinstance(start, datetime.datetime):
        start = datetime.datetime(start.year, start.month, start.day)
    if not isinstance(start, datetime.datetime):
        raise DatasetError(f"{context}: start must be a TOML datetime")
    step_minutes = int(_require(manifest, "step_minutes", context))
    steps_per_day = int(_require(manifest, "steps_per_day", context))
    if step_minutes * steps_per_day != 24 * 60:
        raise DatasetError(f"{context}: step_minutes * steps_per_day must equal 1440")

    split_table = _require(manifest, "split", context)
    split_spec = SplitSpec(
        train_days=int(_require(split_table, "train_days", f"{context} [split]")),
        test_days=int(_require(split_table, "test_days", f"{context} [split]")),
    )

    weather = _read_csv_columns(
        root / str(_require(manifest, "weather_file", context)),
        ["outdoor_temp_c", "pv_per_kw_kwh"],
        non_negative=["pv_per_kw_kwh"],
    )
    outdoor_temp = TimeSeries(weather["outdoor_temp_c"], start, step_minutes, "outdoor_temp")
    pv_per_kw = TimeSeries(weather["pv_per_kw_kwh"], start, step_minutes, "pv_per_kw")

    carbon_cols = _read_csv_columns(
        root / str(_require(manifest, "carbon_file", context)),
        ["kg_co2e_per_kwh"],
        non_negative=["kg_co2e_per_kwh"],
    )
    carbon = TimeSeries(carbon_cols["kg_co2e_per_kwh"], start, step_minutes, "carbon")
    n_steps = len(carbon)

    tou: TouSchedule | None = None
    if "price_file" in manifest:
        rate_cols = _read_csv_columns(
            root / str(manifest["price_file"]),
            ["rate_usd_per_kwh"],
            non_negative=["rate_usd_per_kwh"],
        )
        rate = TimeSeries(rate_cols["rate_usd_per_kwh"], start, step_minutes, "rate")
    else:
        tou_table = _require(manifest, "tou", context)
        bands = tuple(
            TouBand(
                start_hour=int(b["start_hour"]),
                end_hour=int(b["end_hour"]),
                rate=float(b["rate"]),
                tier=str(b.get("tier", "")),
            )
            for b in _require(tou_table, "weekday_bands", f"{context} [tou]")
        )
        tou = TouSchedule(bands, float(_require(tou_table, "weekend_rate", f"{context} [tou]")))
        rate = rate_series_from_tou(tou, start, n_steps, step_minutes)

    buildings: dict[str, BuildingDataset] = {}
    for table in _require(manifest, "buildings", context):
        name = str(_require(table, "name", f"{context} [[buildings]]"))
        bld_context = f"{context} building {name}"
        if name in buildings:
            raise DatasetError(f"{bld_context}: duplicate building name")
        heat_pump = _device_spec(
            _require(table, "heat_pump", bld_context), HeatPumpSpec, {}, bld_context
        )
        heater = _device_spec(
            _require(table, "dhw_heater", bld_context), ElectricHeaterSpec, {}, bld_context
        )
        thermal = _device_spec(
            _require(table, "thermal_model", bld_context), RcModelParams, {}, bld_context
        )
        spec = BuildingSpec(
            name=name,
            heat_pump=heat_pump,
            dhw_heater=heater,
            thermal_model=thermal,
            dhw_storage=_device_spec(
                table.get("dhw_storage"), StorageSpec, THERMAL_STORAGE_DEFAULTS, bld_context
            ),
            battery=_device_spec(table.get("battery"), StorageSpec, BATTERY_DEFAULTS, bld_context),
            pv=_device_spec(table.get("pv"), PvSpec, {}, bld_context),
            surrogate_file=table.get("surrogate_file"),
        )
        cols = _read_csv_columns(
            root / str(_require(table, "file", bld_context)),
            ["cooling_load_kwh", "dhw_load_kwh", "plug_load_kwh", "setpoint_c"],
            non_negative=["cooling_load_kwh", "dhw_load_kwh", "plug_load_kwh"],
        )
        buildings[name] = BuildingDataset(
            spec=spec,
            cooling_load=TimeSeries(
                cols["cooling_load_kwh"], start, step_minutes, f"{name}.cooling_load"
            ),
            dhw_load=TimeSeries(cols["dhw_load_kwh"], start, step_minutes, f"{name}.dhw_load"),
            plug_load=TimeSeries(cols["plug_load_kwh"], start, step_minutes, f"{name}.plug_load"),
            setpoint=TimeSeries(cols["setpoint_c"], start, step_minutes, f"{name}.setpoint"),
            outdoor_temp=outdoor_temp,
            pv_per_kw=pv_per_kw,
        )
    if not buildings:
        raise DatasetError(f"{context}: no buildings declared")

    return DistrictDataset(
        name=str(manifest.get("name", root.name)),
        start=start,
        step_minutes=step_minutes,
        steps_per_day=steps_per_day,
        buildings=buildings,
        tou=tou,
        rate=rate,
        carbon=carbon,
        outdoor_temp=outdoor_temp,
        pv_per_kw=pv_per_kw,
        split_spec=split_spec,
        fixed_charge_per_step=float(manifest.get("fixed_charge_per_step", 0.0)),
        root=root,
    )


# ---------------------------------------------------------------- CSV writing

def _write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    n = len(next(iter(columns.values())))
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names)
        for i in range(n):
            writer.writerow([repr(float(columns[c][i])) for c in names])


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, datetime.datetime):
        return value.isoformat()
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _device_lines(prefix: str, spec) -> Iterator[str]:
    yield f"[buildings.{prefix}]"
    for key, value in vars(spec).items():
        yield f"{key} = {_toml_value(value)}"


def save_district(dataset: DistrictDataset, path: str | Path) -> Path:
    """Write a district back to disk in the loadable layout; returns the root."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _write_csv(
        root / "weather.csv",
        {
            "outdoor_temp_c": dataset.outdoor_temp.values,
            "pv_per_kw_kwh": dataset.pv_per_kw.values,
        },
    )
    _write_csv(root / "carbon.csv", {"kg_co2e_per_kwh": dataset.carbon.values})

    lines = [
        f"name = {_toml_value(dataset.name)}",
        f"start = {dataset.start.isoformat()}",
        f"step_minutes = {dataset.step_minutes}",
        f"steps_per_day = {dataset.steps_per_day}",
        f"weather_file = \"weather.csv\"",
        f"carbon_file = \"carbon.csv\"",
    ]
    if dataset.fixed_charge_per_step:
        lines.append(f"fixed_charge_per_step = {_toml_value(dataset.fixed_charge_per_step)}")
    if dataset.tou is None:
        _write_csv(root / "price.csv", {"rate_usd_per_kwh": dataset.rate.values})
        lines.append('price_file = "price.csv"')
    lines += [
        "",
        "[split]",
        f"train_days = {dataset.split_spec.train_days}",
        f"test_days = {dataset.split_spec.test_days}",
    ]
    if dataset.tou is not None:
        lines += ["", "[tou]", f"weekend_rate = {_toml_value(dataset.tou.weekend_rate)}"]
        for band in dataset.tou.weekday_bands:
            lines += [
                "",
                "[[tou.weekday_bands]]",
                f"start_hour = {band.start_hour}",
                f"end_hour = {band.end_hour}",
                f"rate = {_toml_value(band.rate)}",
                f"tier = {_toml_value(band.tier)}",
            ]
    for name, bld in dataset.buildings.items():
        file_name = f"{name.lower()}.csv"
        _write_csv(
            root / file_name,
            {
                "cooling_load_kwh": bld.cooling_load.values,
                "dhw_load_kwh": bld.dhw_load.values,
                "plug_load_kwh": bld.plug_load.values,
                "setpoint_c": bld.setpoint.values,
            },
        )
        lines += ["", "[[buildings]]", f"name = {_toml_value(name)}", f'file = "{file_name}"']
        spec = bld.spec
        if spec.surrogate_file is not None:
            lines.append(f"surrogate_file = {_toml_value(spec.surrogate_file)}")
        lines += list(_device_lines("heat_pump", spec.heat_pump))
        lines += list(_device_lines("dhw_heater", spec.dhw_heater))
        lines += list(_device_lines("thermal_model", spec.thermal_model))
        if spec.dhw_storage is not None:
            lines += list(_device_lines("dhw_storage", spec.dhw_storage))
        if spec.battery is not None:
            lines += list(_device_lines("battery", spec.battery))
        if spec.pv is not None:
            lines += list(_device_lines("pv", spec.pv))
    (root / "district.toml").write_text("\n".join(lines) + "\n")
    return root
