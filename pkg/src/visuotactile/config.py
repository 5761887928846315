"""INI-style run configuration.

Sections map onto dataclasses: ``[scenario]`` -> ScenarioConfig,
``[sensor]`` -> SensorGeometry, ``[train]`` -> TrainConfig and ``[eval]``
for evaluation options.  Tuple values are comma separated.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
from pathlib import Path

from .mvae.train import TrainConfig
from .scene.scenario import ScenarioConfig
from .scene.sensor import SensorGeometry

EVAL_DEFAULTS = {"strips": 4, "contact_tol": 0.1, "rollout_k": 1}


class ConfigError(ValueError):
    pass


def _convert(raw: str, default, name: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple) or default is None and "," in raw:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            out = []
            for s in items:
                try:
                    out.append(int(s))
                except ValueError:
                    try:
                        out.append(float(s))
                    except ValueError:
                        out.append(s)
            return tuple(out)
        if isinstance(default, dict):
            pairs = (p.split(":") for p in raw.split(","))
            return {k.strip(): float(v) for k, v in pairs}
        if default is None:
            if raw.lower() in ("none", ""):
                return None
            return int(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def _fill(cls, section: dict, base=None, skip=()):
    obj = base if base is not None else cls()
    types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    changes = {}
    for key, raw in section.items():
        if key not in types or key in skip:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        default = getattr(obj, key)
        if raw.strip().lower() == "none" and "None" in types[key]:
            changes[key] = None
            continue
        if default is None and types[key].startswith("tuple"):
            default = ()
        changes[key] = _convert(raw, default, key)
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclasses.dataclass
class RunSettings:
    scenario: ScenarioConfig
    train: TrainConfig
    eval: dict
    text: str = ""

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]


def parse_config(text: str = "") -> RunSettings:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    unknown = set(cp.sections()) - {"scenario", "sensor", "train", "eval"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    sensor = _fill(SensorGeometry, dict(cp["sensor"]) if cp.has_section("sensor") else {},
                   skip=("phong", "darkening"))
    scen = dict(cp["scenario"]) if cp.has_section("scenario") else {}
    scenario = _fill(ScenarioConfig, scen, ScenarioConfig(sensor=sensor), skip=("sensor",))
    train = _fill(TrainConfig, dict(cp["train"]) if cp.has_section("train") else {})
    ev = dict(EVAL_DEFAULTS)
    if cp.has_section("eval"):
        for k, v in cp["eval"].items():
            if k not in ev:
                raise ConfigError(f"unknown eval key {k!r}")
            ev[k] = _convert(v, ev[k], k)
    return RunSettings(scenario, train, ev, text)


def load_config(path) -> RunSettings:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text())
