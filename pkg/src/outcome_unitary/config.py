"""YAML scenario configuration with strict field checking.

Unknown keys are rejected, and every error names the offending field and,
when it came from a file, its line.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .mechanism import MeasurementScenario

__all__ = ["EnsembleSpec", "SweepSpec", "ScenarioConfig", "load_config", "parse_config"]

SYSTEM_KINDS = ("mixed", "pure", "orthogonal")
DELTA_SOURCES = ("measured", "calibrated")


@dataclass(frozen=True)
class EnsembleSpec:
    mechanisms: int = 5
    environments: int = 5
    mechanism_scale: float = 0.0
    environment_scale: float = 0.0
    mechanism_weights: Any = "uniform"
    environment_weights: Any = "uniform"


@dataclass(frozen=True)
class SweepSpec:
    delta: tuple = ()
    eta: tuple = ()
    gamma: tuple = ()


@dataclass(frozen=True)
class ScenarioConfig:
    d_S: int
    d_A: int
    d_E: int
    D: int | None = None
    theta: int = 1
    delta: float = 0.0
    delta_source: str = "measured"
    trials: int = 1
    seed: int = 0
    epsilon_max: float = 0.01
    system: str = "mixed"
    tail_weight: float = 0.0
    env_rank: int | None = None
    spectrum: tuple | None = None
    amplitudes: tuple | None = None
    random_bases: bool = False
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output: str | None = None
    workers: int | None = None

    @property
    def dominant_rank(self) -> int:
        return self.D if self.D is not None else max(1, self.d_E // self.d_S)

    def scenario(self, seed: int | None = None) -> MeasurementScenario:
        return MeasurementScenario.standard(
            self.d_S, self.d_A, self.d_E, self.dominant_rank, self.theta,
            seed=self.seed if seed is None else seed,
            random_bases=self.random_bases,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring output path and workers."""
        data = self.to_dict()
        data.pop("output")
        data.pop("workers")
        blob = json.dumps(data, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()


# key -> expected type; "mapping" marks a nested section
_TOP = {
    "dimensions": "mapping",
    "theta": int,
    "delta": float,
    "delta_source": str,
    "trials": int,
    "seed": int,
    "epsilon_max": float,
    "system": str,
    "environment": "mapping",
    "amplitudes": list,
    "random_bases": bool,
    "ensemble": "mapping",
    "sweep": "mapping",
    "output": str,
    "workers": int,
}
_DIMENSIONS = {"d_S": int, "d_A": int, "d_E": int, "D": int}
_ENVIRONMENT = {"tail_weight": float, "rank": int, "spectrum": list}
_ENSEMBLE = {
    "mechanisms": int,
    "environments": int,
    "mechanism_scale": float,
    "environment_scale": float,
    "mechanism_weights": (str, list),
    "environment_weights": (str, list),
}
_SWEEP = {"delta": list, "eta": list, "gamma": list}


class _Located:
    """Python value tree plus source lines for every key path."""

    def __init__(self):
        self.lines: dict[str, int] = {}

    def build(self, node, path=""):
        if isinstance(node, yaml.MappingNode):
            out = {}
            for key_node, value_node in node.value:
                key = key_node.value
                sub = f"{path}.{key}" if path else key
                self.lines[sub] = key_node.start_mark.line + 1
                out[key] = self.build(value_node, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self.build(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return yaml.safe_load(yaml.serialize(node))


def _where(lines, path):
    line = lines.get(path)
    return f"field '{path}'" + (f" (line {line})" if line else "")


def _coerce(value, kind, path, lines):
    if kind == "mapping":
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(lines, path)} must be a mapping")
        return value
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if float in kinds and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigError(f"{_where(lines, path)} must be {_names(kinds)}, got a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(f"{_where(lines, path)} must be {_names(kinds)}, got {value!r}")
    return value


def _names(kinds):
    return " or ".join({int: "an integer", float: "a number", str: "a string",
                        bool: "a boolean", list: "a list"}[k] for k in kinds)


def _section(data, schema, prefix, lines):
    out = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ConfigError(f"unknown {_where(lines, path)}")
        if value is None:
            continue
        out[key] = _coerce(value, schema[key], path, lines)
    return out


def _floats(values, path, lines):
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{_where(lines, path)} entry {i} must be a number, got {v!r}")
        out.append(float(v))
    return tuple(out)


def parse_config(data: dict, lines: dict | None = None) -> ScenarioConfig:
    """Validate a decoded mapping and build a :class:`ScenarioConfig`."""
    lines = lines or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at top level")
    top = _section(data, _TOP, "", lines)
    if "dimensions" not in top:
        raise ConfigError("missing required field 'dimensions'")
    dims = _section(top["dimensions"], _DIMENSIONS, "dimensions", lines)
    for key in ("d_S", "d_A", "d_E"):
        if key not in dims:
            raise ConfigError(f"missing required field 'dimensions.{key}'")
    env = _section(top.get("environment", {}), _ENVIRONMENT, "environment", lines)
    ens = _section(top.get("ensemble", {}), _ENSEMBLE, "ensemble", lines)
    sweep = _section(top.get("sweep", {}), _SWEEP, "sweep", lines)

    kwargs: dict[str, Any] = dict(dims)
    for key in ("theta", "delta", "delta_source", "trials", "seed", "epsilon_max",
                "system", "random_bases", "output", "workers"):
        if key in top:
            kwargs[key] = top[key]
    if "tail_weight" in env:
        kwargs["tail_weight"] = env["tail_weight"]
    if "rank" in env:
        kwargs["env_rank"] = env["rank"]
    if "spectrum" in env:
        kwargs["spectrum"] = _floats(env["spectrum"], "environment.spectrum", lines)
    if "amplitudes" in top:
        kwargs["amplitudes"] = _floats(top["amplitudes"], "amplitudes", lines)
    for key in ("mechanism_weights", "environment_weights"):
        if isinstance(ens.get(key), list):
            ens[key] = _floats(ens[key], f"ensemble.{key}", lines)
        elif key in ens and ens[key] != "uniform":
            raise ConfigError(f"{_where(lines, 'ensemble.' + key)} must be 'uniform' or a list")
    kwargs["ensemble"] = EnsembleSpec(**ens)
    kwargs["sweep"] = SweepSpec(
        **{k: _floats(v, f"sweep.{k}", lines) for k, v in sweep.items()}
    )
    cfg = ScenarioConfig(**kwargs)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ScenarioConfig, lines) -> None:
    def fail(path, msg):
        raise ConfigError(f"{_where(lines, path)} {msg}")

    if cfg.trials < 1:
        fail("trials", "must be at least 1")
    if cfg.seed < 0:
        fail("seed", "must be non-negative")
    if cfg.system not in SYSTEM_KINDS:
        fail("system", f"must be one of {', '.join(SYSTEM_KINDS)}")
    if cfg.delta_source not in DELTA_SOURCES:
        fail("delta_source", f"must be one of {', '.join(DELTA_SOURCES)}")
    if not 0 <= cfg.delta < 0.25:
        fail("delta", "must satisfy 0 <= delta < 0.25")
    if any(not 0 <= x < 0.25 for x in cfg.sweep.delta):
        fail("sweep.delta", "entries must satisfy 0 <= delta < 0.25")
    if not 0 <= cfg.tail_weight <= 1:
        fail("environment.tail_weight", "must lie in [0, 1]")
    if cfg.epsilon_max < 0:
        fail("epsilon_max", "must be non-negative")
    ens = cfg.ensemble
    for key in ("mechanism_scale", "environment_scale"):
        if getattr(ens, key) < 0:
            fail(f"ensemble.{key}", "must be non-negative")
    if ens.mechanism_scale > 2:
        fail("ensemble.mechanism_scale", "must not exceed 2")
    if any(x < 0 for x in cfg.sweep.eta + cfg.sweep.gamma):
        fail("sweep", "eta and gamma entries must be non-negative")
    if any(x > 2 for x in cfg.sweep.gamma):
        fail("sweep.gamma", "entries must not exceed 2")
    for key, count in (("mechanisms", ens.mechanisms), ("environments", ens.environments)):
        if count < 1:
            fail(f"ensemble.{key}", "must be at least 1")
    for key, count in (("mechanism_weights", ens.mechanisms),
                       ("environment_weights", ens.environments)):
        w = getattr(ens, key)
        if w != "uniform":
            if len(w) != count or any(x < 0 for x in w) or abs(sum(w) - 1) > 1e-12:
                fail(f"ensemble.{key}", f"must be {count} non-negative numbers summing to 1")
    if cfg.workers is not None and cfg.workers < 1:
        fail("workers", "must be at least 1")
    if cfg.env_rank is not None and not 1 <= cfg.env_rank <= cfg.d_E:
        fail("environment.rank", f"must lie in 1..{cfg.d_E}")
    if cfg.spectrum is not None:
        if len(cfg.spectrum) != cfg.d_E:
            fail("environment.spectrum", f"must list {cfg.d_E} eigenvalues")
        if any(x < 0 for x in cfg.spectrum) or abs(sum(cfg.spectrum) - 1) > 1e-10:
            fail("environment.spectrum", "must be non-negative and sum to 1")
    if cfg.amplitudes is not None and len(cfg.amplitudes) != cfg.d_S:
        fail("amplitudes", f"must list {cfg.d_S} amplitudes")
    if cfg.system == "orthogonal" and cfg.d_S < 2:
        fail("system", "'orthogonal' needs d_S >= 2")
    # dimension errors (including d_S * D > d_E) surface as library exceptions
    cfg.scenario()


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a YAML configuration file."""
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML syntax error{where}: {getattr(exc, 'problem', exc)}")
    if node is None:
        raise ConfigError(f"{path}: configuration is empty")
    located = _Located()
    data = located.build(node)
    return parse_config(data, located.lines)
