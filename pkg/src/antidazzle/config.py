"""Run configuration: JSON file, schema checks and environment overrides.

The file is a JSON object with the sections ``optics``, ``sensor``,
``photon``, ``dataset``, ``restore`` and ``paths`` plus ``master_seed``.
Missing keys take their defaults (the reference camera and lens); unknown
keys are rejected.

Any key can be overridden from the environment as
``ANTIDAZZLE_<SECTION>__<KEY>``, e.g. ``ANTIDAZZLE_SENSOR__GAIN=0.4`` or
``ANTIDAZZLE_MASTER_SEED=7``. Values are parsed as JSON, falling back to a
plain string.
"""

from __future__ import annotations

import dataclasses
import json
import os
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataIOError
from .optics import OpticsConfig
from .restore import WienerConfig
from .sensor import PhotonModel, SensorModel
from .synthesis import DatasetConfig

ENV_PREFIX = "ANTIDAZZLE_"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PathsConfig:
    scenes: str | None = None
    output: str = "out"


@dataclass(frozen=True)
class RunConfig:
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    sensor: SensorModel = field(default_factory=SensorModel)
    photon: PhotonModel = field(default_factory=PhotonModel)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    restore: WienerConfig = field(default_factory=WienerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    master_seed: int = 0

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            d[f.name] = _jsonable(dataclasses.asdict(val) if dataclasses.is_dataclass(val) else val)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


SECTIONS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "master_seed"}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _section_cls(name: str):
    return typing.get_type_hints(RunConfig)[name]


def _coerce(value, hint):
    """Lists to tuples for tuple-typed fields; everything else as given."""
    origin = typing.get_origin(hint)
    if origin is tuple and isinstance(value, list):
        return tuple(value)
    if origin in (typing.Union, types.UnionType):
        for arg in typing.get_args(hint):
            if typing.get_origin(arg) is tuple and isinstance(value, list):
                return tuple(value)
    return value


def _build_section(name: str, values: dict):
    cls = _section_cls(name)
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be an object")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    kwargs = {k: _coerce(v, hints[k]) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} config: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {version}")
    unknown = sorted(set(data) - set(SECTIONS) - {"master_seed"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {name: _build_section(name, data[name]) for name in SECTIONS if name in data}
    if "master_seed" in data:
        seed = data["master_seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")
        kwargs["master_seed"] = seed
    return RunConfig(**kwargs)


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env(data: dict, environ=None) -> dict:
    """Merge ``ANTIDAZZLE_*`` overrides into a raw config dict."""
    environ = os.environ if environ is None else environ
    data = json.loads(json.dumps(data))
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower()
        if path == "master_seed":
            data["master_seed"] = _parse_env_value(raw)
            continue
        section, sep, name = path.partition("__")
        if not sep or section not in SECTIONS:
            raise ConfigError(f"unrecognised environment override {key}")
        data.setdefault(section, {})[name] = _parse_env_value(raw)
    return data


def load_config(path=None, environ=None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(apply_env(data, environ))


def schema() -> dict:
    """Key listing with types and defaults, for documentation."""
    out = {"master_seed": {"type": "int", "default": 0}}
    for name in SECTIONS:
        cls = _section_cls(name)
        hints = typing.get_type_hints(cls)
        inst = cls()
        out[name] = {
            f.name: {"type": str(hints[f.name]).replace("typing.", ""), "default": _jsonable(getattr(inst, f.name))}
            for f in dataclasses.fields(cls)
        }
    return out
