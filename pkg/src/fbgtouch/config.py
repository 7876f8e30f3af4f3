"""Run configuration: one TOML file with a block per module.

Every block is optional and falls back to defaults. Unknown blocks or keys
are rejected.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .calib import ScanPlan
from .fbgsim import FbgLayout, SimConfig, default_layout
from .geometry import SensorGeometry
from .grasp import EpisodeConfig
from .nn import ModelConfig
from .pipeline import PrepConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LayoutBlock:
    rings: tuple = (0.15, 0.45)
    per_ring: int = 4
    placement_sigma_mm: float = 0.5
    wavelength_sigma_nm: float = 0.1
    consistency_seeds: tuple = (1, 2, 3)

    def build(self) -> FbgLayout:
        return default_layout(tuple(self.rings), self.per_ring)


@dataclass(frozen=True)
class ModelBlock:
    feature_dim: int = 64
    alpha: float = 1.0
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0

    def build(self, input_dim: int, window_len: int) -> ModelConfig:
        return ModelConfig(input_dim=input_dim, window_len=window_len, **asdict(self))


@dataclass(frozen=True)
class GraspBlock:
    count: int = 200
    test_fraction: float = 0.25
    feature_dim: int = 32
    epochs: int = 15
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)


@dataclass(frozen=True)
class RunConfig:
    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    layout: LayoutBlock = field(default_factory=LayoutBlock)
    sim: SimConfig = field(default_factory=SimConfig)
    scan: ScanPlan = field(default_factory=ScanPlan)
    prep: PrepConfig = field(default_factory=PrepConfig)
    model: ModelBlock = field(default_factory=ModelBlock)
    grasp: GraspBlock = field(default_factory=GraspBlock)
    seed: int = 0
    out: str = "runs/default"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def model_config(self) -> ModelConfig:
        return self.model.build(len(self.layout.rings) * self.layout.per_ring, self.prep.w_d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _build(cls, block, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(block) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in block.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{where}]: {exc}") from exc


def _geometry(block) -> SensorGeometry:
    block = dict(block)
    if "rotations" in block:
        if "rotation_increment_rad" in block:
            raise ConfigError("[geometry] give rotations or rotation_increment_rad, not both")
        rotations = block.pop("rotations")
        if not isinstance(rotations, int) or rotations < 1:
            raise ConfigError("[geometry] rotations must be a positive integer")
        block["rotation_increment_rad"] = 2.0 * math.pi / rotations
    return _build(SensorGeometry, block, "geometry")


def from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw = {}
    if "geometry" in data:
        kw["geometry"] = _geometry(data["geometry"])
    for name, cls in (("layout", LayoutBlock), ("sim", SimConfig), ("scan", ScanPlan),
                      ("prep", PrepConfig), ("model", ModelBlock)):
        if name in data:
            kw[name] = _build(cls, data[name], name)
    if "grasp" in data:
        block = dict(data["grasp"])
        episode = _build(EpisodeConfig, block.pop("episode", {}), "grasp.episode")
        kw["grasp"] = _build(GraspBlock, {**block, "episode": episode}, "grasp")
    for name in ("seed", "out"):
        if name in data:
            kw[name] = data[name]
    if not isinstance(kw.get("seed", 0), int):
        raise ConfigError("seed must be an integer")
    cfg = RunConfig(**kw)
    try:
        cfg.layout.build()
        cfg.model_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load(path) -> RunConfig:
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return from_dict(data)
