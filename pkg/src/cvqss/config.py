"""JSON configuration. Unknown keys are rejected at every level."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .model import NetworkLayout, SystemParams
from .optimizer import DEFAULT_BOUNDS, DEFAULT_GRID, DEFAULT_ITERS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    grid_points: int = DEFAULT_GRID
    iterations: int = DEFAULT_ITERS
    policy: str = "min"


@dataclass(frozen=True)
class SimulationConfig:
    pulses: int = 100_000
    keep_noise: bool = False


@dataclass(frozen=True)
class PostprocessConfig:
    estimation_fraction: float = 0.1
    round_fraction: float = 0.5
    min_samples: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class SweepConfig:
    lengths: tuple[float, ...] = ()
    players: tuple[int, ...] = ()
    deltas: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class Config:
    params: SystemParams = field(default_factory=SystemParams)
    layout: Optional[NetworkLayout] = None
    V_A: Optional[float] = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    sweep: Optional[SweepConfig] = None


def _check_keys(section: str, data: Any, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")
    return data


def _build(section: str, cls, data: Any, convert: dict | None = None):
    names = {f.name for f in fields(cls)}
    data = dict(_check_keys(section, data, names))
    for key, fn in (convert or {}).items():
        if key in data:
            data[key] = fn(data[key])
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def length_grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(start + i * step for i in range(count))


def _lengths(spec: Any) -> tuple[float, ...]:
    if isinstance(spec, dict):
        _check_keys("sweep.lengths", spec, {"start", "stop", "step"})
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if step <= 0 or stop < start:
            raise ConfigError("sweep.lengths: need step > 0 and stop >= start")
        return length_grid(start, stop, step)
    return tuple(float(v) for v in spec)


def parse_config(data: dict) -> Config:
    data = _check_keys(
        "config", data,
        {"params", "layout", "V_A", "optimizer", "simulation", "postprocess", "sweep"},
    )
    kw: dict[str, Any] = {}
    if "params" in data:
        kw["params"] = _build("params", SystemParams, data["params"])
    if "layout" in data:
        kw["layout"] = _build("layout", NetworkLayout, data["layout"], {"distances": tuple})
    if "V_A" in data:
        va = data["V_A"]
        if not isinstance(va, (int, float)) or va <= 0:
            raise ConfigError("V_A must be a positive number")
        kw["V_A"] = float(va)
    if "optimizer" in data:
        kw["optimizer"] = _build("optimizer", OptimizerConfig, data["optimizer"], {"bounds": tuple})
    if "simulation" in data:
        kw["simulation"] = _build("simulation", SimulationConfig, data["simulation"])
    if "postprocess" in data:
        kw["postprocess"] = _build("postprocess", PostprocessConfig, data["postprocess"])
    if "sweep" in data:
        sw = _build(
            "sweep", SweepConfig, data["sweep"],
            {"lengths": _lengths, "players": lambda v: tuple(int(x) for x in v),
             "deltas": lambda v: tuple(float(x) for x in v)},
        )
        if not sw.lengths or not sw.players or not sw.deltas:
            raise ConfigError("sweep: lengths, players and deltas must be non-empty")
        if any(L < 0 for L in sw.lengths):
            raise ConfigError("sweep: lengths must be >= 0")
        kw["sweep"] = sw
    return Config(**kw)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
