"""Experiment configuration: a single strict JSON document."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..analysis.adistance import ClassifierConfig
from ..policy import TrainConfig
from ..representation import NoiseModel, get_preset
from ..simulator import SensorSpec, SimConfig
from ..worldgen import UNION_NAMES, Theme, WorldGenSpec, get_table, get_theme


class ConfigError(ValueError):
    pass


def _strict(d: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def parse_theme(t: Any) -> Theme:
    """Theme from a built-in name or an inline definition.

    ``{"base": ..., "name": ..., "delta": ...}`` shifts a built-in theme.
    """
    if isinstance(t, str):
        return get_theme(t)
    if "base" in t:
        _strict(t, {"base", "name", "delta", "hue_jitter", "shading_gain", "pixel_noise_sd"}, "theme")
        kw = {k: t[k] for k in ("hue_jitter", "shading_gain", "pixel_noise_sd") if k in t}
        return get_theme(t["base"]).shifted(t["name"], t.get("delta", (0, 0, 0)), **kw)
    _strict(t, {"name", "base_color", "hue_jitter", "shading_gain", "pixel_noise_sd"}, "theme")
    return Theme.from_dict(t)


@dataclass
class EnvConfig:
    name: str
    world: WorldGenSpec
    theme: Theme
    n_maps: int = 1
    episodes: int = 25
    noise: NoiseModel = field(default_factory=NoiseModel)
    shifted: bool = True

    KEYS = {"name", "world", "theme", "n_maps", "episodes", "noise", "shifted"}

    @classmethod
    def from_dict(cls, d: Mapping, where: str) -> "EnvConfig":
        _strict(d, cls.KEYS, where)
        try:
            env = cls(
                name=d["name"],
                world=WorldGenSpec.from_dict(d["world"]),
                theme=parse_theme(d["theme"]),
                n_maps=int(d.get("n_maps", 1)),
                episodes=int(d.get("episodes", 25)),
                noise=NoiseModel(**d.get("noise", {})),
                shifted=bool(d.get("shifted", True)),
            )
            env.world.validate()
            unknown = set(env.noise.depth_blind) - set(UNION_NAMES)
            if unknown:
                raise ValueError(f"noise.depth_blind: unknown categories {sorted(unknown)}")
            env.theme.color_table(get_table(env.world.category_palette.table))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from None
        if env.episodes < 1 or env.n_maps < 1:
            raise ConfigError(f"{where}: episodes and n_maps must be >= 1")
        return env


def _sources(d: Any) -> list[EnvConfig]:
    """One source group or a list of them; all groups share one noise model."""
    items = d if isinstance(d, list) else [d]
    if not items:
        raise ConfigError("source: need at least one group")
    groups = [EnvConfig.from_dict(g, f"source[{k}]") for k, g in enumerate(items)]
    if len({g.noise for g in groups}) != 1:
        raise ConfigError("source: all groups must use the same noise model")
    return groups


@dataclass
class ExperimentConfig:
    raw: dict
    seed: int
    sensor: SensorSpec
    sim: SimConfig
    turn_cost: float
    min_goal_distance: float
    sources: list[EnvConfig]
    episodes_per_map: int
    environments: list[EnvConfig]
    presets: list[str]
    train: TrainConfig
    m_prime: int
    classifier: ClassifierConfig
    representations: list[str]
    bound_delta: float
    bound_lambda: float

    TOP_KEYS = {"seed", "sensor", "sim", "turn_cost", "min_goal_distance", "source", "episodes_per_map",
                "environments", "presets", "train", "analysis"}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        _strict(d, cls.TOP_KEYS, "config")
        try:
            sensor_d = dict(d.get("sensor", {}))
            _strict(sensor_d, {"n_rays", "fov_deg", "max_range"}, "sensor")
            sensor = SensorSpec(int(sensor_d.get("n_rays", 64)), math.radians(sensor_d.get("fov_deg", 90.0)),
                                float(sensor_d.get("max_range", 5.0)))
            sim_d = dict(d.get("sim", {}))
            _strict(sim_d, {"turn_angle_deg", "step_size", "agent_radius", "success_radius", "max_steps"}, "sim")
            sim = SimConfig(math.radians(sim_d.get("turn_angle_deg", 90.0)), float(sim_d.get("step_size", 0.25)),
                            float(sim_d.get("agent_radius", 0.1)), float(sim_d.get("success_radius", 0.5)),
                            int(sim_d.get("max_steps", 200)))
            sim.n_headings
            train_d = dict(d.get("train", {}))
            _strict(train_d, set(TrainConfig.__dataclass_fields__) - {"seed"}, "train")
            train = TrainConfig.from_dict(train_d)
            an = dict(d.get("analysis", {}))
            _strict(an, {"m_prime", "classifier", "representations", "bound"}, "analysis")
            clf_d = dict(an.get("classifier", {}))
            _strict(clf_d, set(ClassifierConfig.__dataclass_fields__), "analysis.classifier")
            bound_d = dict(an.get("bound", {}))
            _strict(bound_d, {"delta", "lambda"}, "analysis.bound")
            presets = list(d.get("presets", ["RGB", "SEER"]))
            for p in presets:
                get_preset(p)
            reps = list(an.get("representations", ["rgb", "depth", "semantics", "navigability", "seer"]))
            from .experiment import REPRESENTATIONS
            for r in reps:
                if r not in REPRESENTATIONS:
                    raise ConfigError(f"analysis.representations: unknown {r!r}")
            envs = [EnvConfig.from_dict(e, f"environments[{k}]") for k, e in enumerate(d.get("environments", []))]
            names = [e.name for e in envs]
            if len(set(names)) != len(names):
                raise ConfigError("environment names must be unique")
            cfg = cls(
                raw=copy.deepcopy(dict(d)),
                seed=int(d.get("seed", 0)),
                sensor=sensor,
                sim=sim,
                turn_cost=float(d.get("turn_cost", 0.05)),
                min_goal_distance=float(d.get("min_goal_distance", 0.0)),
                sources=_sources(d["source"]),
                episodes_per_map=int(d.get("episodes_per_map", 50)),
                environments=envs,
                presets=presets,
                train=train,
                m_prime=int(an.get("m_prime", 1000)),
                classifier=ClassifierConfig(**clf_d),
                representations=reps,
                bound_delta=float(bound_d.get("delta", 0.05)),
                bound_lambda=float(bound_d.get("lambda", 0.0)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
        if cfg.m_prime < 2:
            raise ConfigError("analysis.m_prime must be >= 2")
        # label spaces must line up through the navigability mapping
        for env in [*cfg.sources, *cfg.environments]:
            get_table(env.world.category_palette.table)
        return cfg

    @property
    def source_noise(self) -> NoiseModel:
        return self.sources[0].noise

    @classmethod
    def load(cls, path, seed: int | None = None) -> "ExperimentConfig":
        try:
            with open(path) as f:
                d = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if seed is not None:
            d["seed"] = seed
        return cls.from_dict(d)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = copy.deepcopy(self.raw)
        d["seed"] = seed
        return ExperimentConfig.from_dict(d)

    def config_hash(self) -> str:
        d = copy.deepcopy(self.raw)
        d.pop("seed", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def run_name(self) -> str:
        return f"{self.config_hash()}-seed{self.seed}"
