"""Declarative run configuration read from YAML.

Every section maps onto a dataclass; unknown keys are rejected and every
default reproduces the Chicago burglary setup (0.25 km / 1 day mesh, 5 km
disc around 41.765, -87.665, 400-day windows shifted by 2 days, 50 samples).
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import yaml

from .baselines import KdeConfig, PhmConfig
from .ddgf import DdgfConfig
from .em import EmConfig
from .evaluate import Protocol
from .ingest import CHICAGO_DATE_FORMAT, CHICAGO_CENTER, DISC_RADIUS_KM


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    path: str | None = None
    format: str = "canonical"  # or "raw"
    date_column: str = "Date"
    latitude_column: str = "Latitude"
    longitude_column: str = "Longitude"
    kind_column: str = "Primary Type"
    date_format: str | None = CHICAGO_DATE_FORMAT
    kinds: list[str] = field(default_factory=list)
    center_lat: float = CHICAGO_CENTER[0]
    center_lon: float = CHICAGO_CENTER[1]
    radius_km: float = DISC_RADIUS_KM
    start_date: date | None = date(2010, 5, 5)
    end_date: date | None = date(2011, 9, 16)

    def __post_init__(self):
        if self.format not in ("canonical", "raw"):
            raise ConfigError(f"data.format must be 'canonical' or 'raw', got {self.format!r}")


@dataclass(frozen=True)
class GridConfig:
    dx_km: float = 0.25
    dt_days: float = 1.0


@dataclass(frozen=True)
class PredictSection:
    negative: str = "clamp"
    target_day: int | None = None


@dataclass(frozen=True)
class SimulationConfig:
    expected_events: float = 3000.0
    per_days: float = 400.0
    branching: float = 0.5
    omega: float = 0.5
    sigma: float = 0.3
    radius_km: float = DISC_RADIUS_KM
    horizon: float = 440.0
    seed: int = 0
    epoch: date = date(2010, 5, 5)


@dataclass(frozen=True)
class KernelExportConfig:
    fit_lo: float = 50.0
    fit_hi: float = 400.0


@dataclass(frozen=True)
class RunConfig:
    method: str = "ddgf"
    methods: list[str] = field(default_factory=lambda: ["ddgf", "em", "phm"])
    output_dir: str = "out"
    kernel_path: str | None = None
    workers: int = 1
    data: DataConfig = DataConfig()
    grid: GridConfig = GridConfig()
    protocol: Protocol = Protocol()
    predict: PredictSection = PredictSection()
    ddgf: DdgfConfig = DdgfConfig()
    em: EmConfig = EmConfig()
    phm: PhmConfig = PhmConfig()
    kde: KdeConfig = KdeConfig()
    simulation: SimulationConfig = SimulationConfig()
    kernel_export: KernelExportConfig = KernelExportConfig()

    def __post_init__(self):
        known = {"ddgf", "em", "phm", "kde"}
        for m in [self.method, *self.methods]:
            if m not in known:
                raise ConfigError(f"unknown method {m!r}; expected one of {sorted(known)}")


def _convert(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        errors = []
        for a in inner:
            try:
                return _convert(a, value, where)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(errors[0])
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return from_dict(tp, value, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return [_convert(args[0], v, f"{where}[{i}]") for i, v in enumerate(value)]
    if tp is date:
        if isinstance(value, date):
            return value
        try:
            return date.fromisoformat(str(value))
        except ValueError:
            raise ConfigError(f"{where}: not an ISO date: {value!r}") from None
    if tp is float:
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-3) as strings
            try:
                return float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    return value


def from_dict(cls, data: dict, where: str = ""):
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {k: _convert(hints[k], v, f"{where}.{k}" if where else k) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, date):
        return obj.isoformat()
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def load(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    """Read ``path`` (YAML) and apply ``section.key=value`` overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(raw)
    return from_dict(RunConfig, data)


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
