"""The end-to-end experiment pipeline."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..analysis import TrialRecord, a_distance, spl, success_rate
from ..analysis.bound import BoundInputs, bound_terms
from ..expert import DemoDataset, generate_demos, plan, sample_episode, shortest_path_length
from ..policy import PolicyNet, TrainReport, checkpoint_dict, forward, train
from ..representation import ChannelSet, dataset_features, encode_goal, extract_arrays, get_preset, perturb, union_index
from ..simulator import Observation, episode_rng, rollout
from ..worldgen import WorldMap, generate_world, get_table
from .config import EnvConfig, ExperimentConfig
from . import io

log = logging.getLogger(__name__)

# representations scored by the domain-gap analysis; observation channels only, no goal
REPRESENTATIONS: dict[str, ChannelSet] = {
    "rgb": ChannelSet(use_rgb=True),
    "depth": ChannelSet(use_depth=True),
    "semantics": ChannelSet(use_semantics=True),
    "navigability": ChannelSet(use_navigability=True),
    "seer": ChannelSet(use_depth=True, use_navigability=True),
    "seer_no_sem2nav": ChannelSet(use_depth=True, use_semantics=True),
}

# representation whose d_A enters the bound for each preset
PRESET_REPRESENTATION = {
    "RGB": "rgb",
    "SEER": "seer",
    "SEER_no_sem2nav": "seer_no_sem2nav",
    "DepthOnly": "depth",
    "NavOnly": "navigability",
}

_SOURCE_STREAM = 0
_ENV_STREAM = 1000


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def world_seed(global_seed: int, stream: int, k: int) -> int:
    return int(np.random.SeedSequence([int(global_seed), stream, k]).generate_state(1, dtype=np.uint64)[0])


def build_worlds(env: EnvConfig, global_seed: int, stream: int) -> list[WorldMap]:
    return [generate_world(env.world, world_seed(global_seed, stream, k)) for k in range(env.n_maps)]


def build_source_worlds(cfg: ExperimentConfig) -> tuple[list[WorldMap], list]:
    worlds, themes = [], []
    for g, group in enumerate(cfg.sources):
        ws = build_worlds(group, cfg.seed, _SOURCE_STREAM + g)
        worlds += ws
        themes += [group.theme] * len(ws)
    return worlds, themes


def build_env_worlds(cfg: ExperimentConfig) -> list[list[WorldMap]]:
    return [build_worlds(e, cfg.seed, env_stream(k)) for k, e in enumerate(cfg.environments)]


def env_stream(k: int) -> int:
    return _ENV_STREAM * (k + 1)


def make_demos(cfg: ExperimentConfig, worlds: list[WorldMap], themes: list) -> DemoDataset:
    return generate_demos(worlds, themes, cfg.episodes_per_map, cfg.sensor, cfg.seed, cfg.sim, cfg.turn_cost,
                          cfg.source_noise, cfg.min_goal_distance)


def train_config(cfg: ExperimentConfig):
    return dataclasses.replace(cfg.train, seed=cfg.seed)


@dataclass
class Episode:
    index: int
    map_index: int
    start: object
    goal: tuple[float, float]
    optimal_length: float


def eval_episodes(env: EnvConfig, worlds: list[WorldMap], cfg: ExperimentConfig, stream: int) -> list[Episode]:
    """Fixed evaluation episodes of one environment, shared by every preset."""
    out = []
    for e in range(env.episodes):
        m = e % len(worlds)
        rng = episode_rng(cfg.seed, stream, e)
        attempt = 0
        pair = None
        while pair is None:
            pair = sample_episode(worlds[m], rng, cfg.sim, cfg.min_goal_distance)
            attempt += 1
            if attempt > 1000:
                raise RuntimeError(f"could not sample an episode in {env.name}")
        start, goal = pair
        lstar = shortest_path_length(worlds[m], start, goal, cfg.sim, cfg.turn_cost)
        out.append(Episode(e, m, start, goal, lstar))
    return out


class PolicyAgent:
    """Callable policy: observation -> features -> argmax action."""

    def __init__(self, net: PolicyNet, channels: ChannelSet, max_range: float):
        self.net = net
        self.channels = channels
        self.max_range = max_range
        self._lookup: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _tables(self, name: str):
        if name not in self._lookup:
            t = get_table(name)
            self._lookup[name] = (t.label_array()[None], union_index(t)[None])
        return self._lookup[name]

    def __call__(self, pose, goal, obs: Observation) -> int:
        nav, uni = self._tables(obs.table_name)
        g = np.array([encode_goal(pose, goal)])
        x = extract_arrays(obs.depth[None], obs.semantic[None], obs.rgb[None], g, self.channels,
                           nav, uni, self.max_range)
        return int(np.argmax(forward(self.net, x)[0]))


def _perceiver(env: EnvConfig, cfg: ExperimentConfig):
    if env.noise.is_identity:
        return None
    return lambda obs, rng: perturb(obs, env.noise, rng, cfg.sensor.max_range)


def evaluate(agent, env: EnvConfig, worlds, episodes: list[Episode], cfg: ExperimentConfig,
             stream: int, preset: str) -> tuple[list[TrialRecord], list[dict]]:
    trials, rows = [], []
    perceive = _perceiver(env, cfg)
    for ep in episodes:
        rng = episode_rng(cfg.seed, stream, ep.index, 1)
        traj = rollout(agent, worlds[ep.map_index], env.theme, ep.start, ep.goal, cfg.sensor, cfg.sim,
                       rng, perceive)
        trials.append(TrialRecord(traj.success, ep.optimal_length, traj.path_length))
        rows.append({
            "environment": env.name,
            "preset": preset,
            "episode": ep.index,
            "map": ep.map_index,
            "start": ep.start.as_list(),
            "goal": list(ep.goal),
            "actions": [int(r.action) for r in traj.records],
            "success": traj.success,
            "path_length": traj.path_length,
            "optimal_length": ep.optimal_length,
            "collisions": traj.collision_count,
        })
    return trials, rows


def expert_observations(env: EnvConfig, worlds, episodes: list[Episode], cfg: ExperimentConfig,
                        stream: int) -> DemoDataset:
    """Observations along expert paths of the evaluation episodes (policy-independent)."""
    from ..expert import PlanFollower

    perceive = _perceiver(env, cfg)
    rows = []
    for ep in episodes:
        world = worlds[ep.map_index]
        p = plan(world, ep.start, ep.goal, cfg.sim, cfg.turn_cost)
        rng = episode_rng(cfg.seed, stream, ep.index, 2)
        sim = dataclasses.replace(cfg.sim, max_steps=max(cfg.sim.max_steps, len(p)))
        traj = rollout(PlanFollower(p.actions), world, env.theme, ep.start, ep.goal, cfg.sensor, sim,
                       rng, perceive)
        for t, rec in enumerate(traj.records):
            rows.append((ep.map_index, ep.index, t, rec.pose, ep.goal, rec.observation, int(rec.action)))
    return DemoDataset.from_records(rows, [w.table.name for w in worlds], cfg.sensor.n_rays)


def domain_samples(ds: DemoDataset, rep: str, m_prime: int, max_range: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(ds), size=min(m_prime, len(ds)), replace=False))
    return dataset_features(ds.subset(idx), REPRESENTATIONS[rep], max_range, goal=False)


@dataclass
class ExperimentReport:
    config_hash: str
    seed: int
    results: list[dict] = field(default_factory=list)
    adistance: list[dict] = field(default_factory=list)
    bounds: list[dict] = field(default_factory=list)
    training: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**d)

    def sr(self, env: str, preset: str) -> float:
        for r in self.results:
            if r["environment"] == env and r["preset"] == preset:
                return r["SR"]
        raise KeyError((env, preset))

    def d_a(self, env: str, rep: str) -> float:
        for r in self.adistance:
            if r["environment"] == env and r["representation"] == rep:
                return r["d_a"]
        raise KeyError((env, rep))


class _Stage:
    def __init__(self, name: str, timing: dict):
        self.name = name
        self.timing = timing

    def __enter__(self):
        log.info("stage %s", self.name)
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timing[self.name] = round(time.perf_counter() - self.t0, 3)
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_experiment(cfg: ExperimentConfig, run_dir: str | os.PathLike | None = None) -> ExperimentReport:
    """Run the full pipeline; artifacts go to ``run_dir`` when given.

    Every preset is trained on the same demonstrations and evaluated on the
    same episodes. On failure a :class:`StageError` names the stage; files
    written before it are left in place.
    """
    out = Path(run_dir) if run_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.raw, indent=2, sort_keys=True))
    report = ExperimentReport(cfg.config_hash(), cfg.seed)
    timing = report.timing
    t_start = time.perf_counter()

    with _Stage("worlds", timing):
        source_worlds, source_themes = build_source_worlds(cfg)
        env_worlds = build_env_worlds(cfg)
        if out is not None:
            io.save_worlds(out / "worlds", "source", source_worlds)
            for e, ws in zip(cfg.environments, env_worlds):
                io.save_worlds(out / "worlds", e.name, ws)

    with _Stage("demos", timing):
        demos = make_demos(cfg, source_worlds, source_themes)
        if out is not None:
            io.save_dataset(demos, out / "demos.jsonl")

    nets: dict[str, PolicyNet] = {}
    with _Stage("train", timing):
        tcfg = train_config(cfg)
        for preset in cfg.presets:
            net, rep = train(demos, get_preset(preset), tcfg, cfg.sensor.max_range)
            nets[preset] = net
            d = rep.to_dict()
            timing[f"train:{preset}"] = round(d.pop("wall_clock"), 3)
            d["n_train_samples"] = len(demos)
            report.training[preset] = d
            if out is not None:
                (out / "checkpoints").mkdir(exist_ok=True)
                with open(out / "checkpoints" / f"{preset}.json", "w") as f:
                    json.dump(checkpoint_dict(net, get_preset(preset), tcfg), f)

    episodes = {}
    with _Stage("eval", timing):
        traj_rows = []
        for k, (env, worlds) in enumerate(zip(cfg.environments, env_worlds)):
            stream = env_stream(k)
            episodes[env.name] = eps = eval_episodes(env, worlds, cfg, stream)
            for preset in cfg.presets:
                agent = PolicyAgent(nets[preset], get_preset(preset), cfg.sensor.max_range)
                trials, rows = evaluate(agent, env, worlds, eps, cfg, stream, preset)
                traj_rows += rows
                report.results.append({
                    "environment": env.name,
                    "preset": preset,
                    "N": len(trials),
                    "SR": success_rate(trials),
                    "SPL": spl(trials),
                })
        if out is not None:
            io.write_jsonl(out / "trajectories.jsonl", (json.dumps(r) for r in traj_rows))

    with _Stage("adistance", timing):
        src = {rep: domain_samples(demos, rep, cfg.m_prime, cfg.sensor.max_range, cfg.seed)
               for rep in cfg.representations}
        for k, (env, worlds) in enumerate(zip(cfg.environments, env_worlds)):
            if not env.shifted:
                continue
            stream = env_stream(k)
            tgt_ds = expert_observations(env, worlds, episodes[env.name], cfg, stream)
            for rep in cfg.representations:
                tgt = domain_samples(tgt_ds, rep, cfg.m_prime, cfg.sensor.max_range, cfg.seed + 1)
                res = a_distance(src[rep], tgt, cfg.classifier, seed=cfg.seed)
                row = {"environment": env.name, "representation": rep}
                row.update(res.to_dict())
                report.adistance.append(row)

    with _Stage("bound", timing):
        for preset in cfg.presets:
            rep = PRESET_REPRESENTATION[preset]
            if rep not in cfg.representations:
                continue
            val_acc = report.training[preset]["val_accuracy"]
            eps_s = 1.0 - (val_acc if val_acc is not None else report.training[preset]["train_accuracy"][-1])
            n_train = report.training[preset]["n_train_samples"]
            for row in report.adistance:
                if row["representation"] != rep:
                    continue
                inp = BoundInputs(eps_s_hat=eps_s, d_a=row["d_a"], lam=cfg.bound_lambda,
                                  d=REPRESENTATIONS[rep].feature_length(cfg.sensor.n_rays, goal=False) + 1,
                                  m=n_train, m_prime=row["m_prime"], delta=cfg.bound_delta)
                entry = {"environment": row["environment"], "preset": preset, "inputs": inp.to_dict(),
                         "lambda_note": "lambda is not estimable from unlabeled data; supplied by config"}
                try:
                    terms = bound_terms(inp)
                except ValueError as e:
                    # e.g. fewer labeled samples than the VC dimension
                    entry.update(terms=None, bound=None, skipped=str(e))
                else:
                    entry.update(terms=dataclasses.asdict(terms), bound=terms.total)
                report.bounds.append(entry)

    report.provenance = {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "navgap_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
        "demo_samples": len(demos),
        "demo_counts": demos.provenance.get("counts", {}),
    }
    timing["total"] = round(time.perf_counter() - t_start, 3)
    if out is not None:
        io.emit_report(report, out, ("json", "csv", "markdown"))
    return report
