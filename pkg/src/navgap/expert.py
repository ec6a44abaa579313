"""Shortest-path expert on the (cell, heading) lattice and demonstration datasets.

The planner runs a backward uniform-cost search from the goal region,
giving a cost-to-go for every lattice state. Plans are read off greedily
with the fixed preference Forward < Left < Right, so re-planning from any
state along a plan reproduces the rest of that plan.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .representation import NoiseModel, perturb
from .simulator import (Action, Observation, SensorSpec, SimConfig, episode_rng, goal_reached,
                        rollout)
from .worldgen import Pose, Theme, WorldMap, sample_free_pose

log = logging.getLogger(__name__)

DEFAULT_TURN_COST = 0.05
# lattice costs are integers in this unit (metres) so ties compare exactly
COST_UNIT = 1e-3
_PREFERENCE = (Action.GO_FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)
_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))


class UnreachableGoal(RuntimeError):
    pass


def _to_units(metres: float) -> int:
    u = metres / COST_UNIT
    if abs(u - round(u)) > 1e-6 or round(u) <= 0:
        raise ValueError(f"cost {metres} m is not a positive multiple of {COST_UNIT} m")
    return int(round(u))


@dataclass(frozen=True)
class Plan:
    actions: tuple[Action, ...]
    geodesic_length: float
    cost: float

    def __len__(self) -> int:
        return len(self.actions)


class Lattice:
    """Finite (cell, heading) state graph of one world under one motion model."""

    def __init__(self, world: WorldMap, cfg: SimConfig = SimConfig(), turn_cost: float = DEFAULT_TURN_COST):
        if abs(cfg.step_size - world.resolution) > 1e-12:
            raise ValueError("lattice planning needs step_size equal to the grid resolution")
        self.n_headings = cfg.n_headings
        if self.n_headings % 4:
            raise ValueError("lattice planning needs a heading count divisible by 4")
        self.world = world
        self.cfg = cfg
        self.fwd_cost = _to_units(cfg.step_size)
        self.turn_cost = _to_units(turn_cost)
        self.state_ok = world.clearance_mask(cfg.agent_radius).astype(np.uint8)
        self.fwd_ok = world.cached(
            ("fwd", cfg.agent_radius),
            lambda: kernels.forward_edges(world.obstacle, world.resolution, cfg.agent_radius),
        )
        self._fields: dict[tuple[float, float], np.ndarray] = {}

    def goal_mask(self, goal: tuple[float, float]) -> np.ndarray:
        ny, nx = self.state_ok.shape
        res = self.world.resolution
        xs = (np.arange(nx) + 0.5) * res
        ys = (np.arange(ny) + 0.5) * res
        d = np.hypot(xs[None, :] - goal[0], ys[:, None] - goal[1])
        return (d <= self.cfg.success_radius).astype(np.uint8)

    def cost_field(self, goal: tuple[float, float]) -> np.ndarray:
        key = (float(goal[0]), float(goal[1]))
        if key not in self._fields:
            if len(self._fields) > 64:
                self._fields.clear()
            self._fields[key] = kernels.cost_to_go(self.state_ok, self.fwd_ok, self.goal_mask(key),
                                                   self.n_headings, self.fwd_cost, self.turn_cost)
        return self._fields[key]

    def state_of(self, pose: Pose) -> tuple[int, int, int]:
        """Lattice state containing ``pose`` (cell by floor, heading by nearest)."""
        i, j = self.world.cell_of(pose.x, pose.y)
        h = int(round(pose.heading / (2 * math.pi / self.n_headings))) % self.n_headings
        return i, j, h

    def successor(self, state, action: Action):
        i, j, h = state
        H = self.n_headings
        if action is Action.TURN_LEFT:
            return (i, j, (h + 1) % H), self.turn_cost
        if action is Action.TURN_RIGHT:
            return (i, j, (h - 1) % H), self.turn_cost
        q = H // 4
        if h % q or not self.fwd_ok[j, i, h // q]:
            return None, None
        di, dj = _STEPS[h // q]
        ni, nj = i + di, j + dj
        if not self.state_ok[nj, ni]:
            return None, None
        return (ni, nj, h), self.fwd_cost

    def walk(self, start: Pose, goal: tuple[float, float]) -> Iterator[Action]:
        """Yield the greedy optimal action sequence from ``start`` to ``goal``."""
        dist = self.cost_field(goal)
        s = self.state_of(start)
        i, j, h = s
        if not (0 <= j < dist.shape[0] and 0 <= i < dist.shape[1]) or dist[j, i, h] < 0:
            raise UnreachableGoal(f"no collision-free path from {start} to {goal}")
        d = int(dist[s[1], s[0], s[2]])
        guard = dist.size
        while d > 0:
            guard -= 1
            if guard < 0:
                raise RuntimeError("cost field is inconsistent")
            for a in _PREFERENCE:
                nxt, c = self.successor(s, a)
                if nxt is None:
                    continue
                dn = int(dist[nxt[1], nxt[0], nxt[2]])
                if dn >= 0 and dn + c == d:
                    yield a
                    s, d = nxt, dn
                    break
            else:
                raise RuntimeError("cost field has no consistent successor")


def _lattice(world: WorldMap, cfg: SimConfig, turn_cost: float) -> Lattice:
    return world.cached(("lattice", cfg, turn_cost), lambda: Lattice(world, cfg, turn_cost))


def plan(world: WorldMap, start: Pose, goal: tuple[float, float], cfg: SimConfig = SimConfig(),
         turn_cost: float = DEFAULT_TURN_COST) -> Plan:
    """Minimum-cost action sequence (forward = step_size, turn = ``turn_cost``)."""
    lat = _lattice(world, cfg, turn_cost)
    actions = tuple(lat.walk(start, goal))
    n_fwd = sum(1 for a in actions if a is Action.GO_FORWARD)
    n_turn = len(actions) - n_fwd
    cost_units = n_fwd * lat.fwd_cost + n_turn * lat.turn_cost
    return Plan(actions, n_fwd * cfg.step_size, cost_units * COST_UNIT)


def shortest_path_length(world: WorldMap, start: Pose, goal: tuple[float, float],
                         cfg: SimConfig = SimConfig(), turn_cost: float = DEFAULT_TURN_COST) -> float:
    """Translation length of the optimal plan, counted without storing the actions."""
    lat = _lattice(world, cfg, turn_cost)
    n_fwd = sum(1 for a in lat.walk(start, goal) if a is Action.GO_FORWARD)
    return n_fwd * cfg.step_size


def plan_cost(world: WorldMap, start: Pose, goal: tuple[float, float], cfg: SimConfig = SimConfig(),
              turn_cost: float = DEFAULT_TURN_COST) -> float:
    """Optimal mixed cost straight from the cost-to-go field."""
    lat = _lattice(world, cfg, turn_cost)
    i, j, h = lat.state_of(start)
    d = int(lat.cost_field(goal)[j, i, h])
    if d < 0:
        raise UnreachableGoal(f"no collision-free path from {start} to {goal}")
    return d * COST_UNIT


class PlanFollower:
    """Policy callable that replays a fixed plan."""

    def __init__(self, actions: Sequence[Action]):
        self._it = iter(actions)

    def __call__(self, pose, goal, obs) -> Action:
        return next(self._it)


@dataclass
class DemoDataset:
    """Flat arrays of (pose, goal, observation, expert action) samples.

    ``tables[w]`` names the category table of world ``w``; semantic ids
    of samples from that world index into it.
    """

    world_id: np.ndarray
    episode: np.ndarray
    t: np.ndarray
    pose: np.ndarray
    goal: np.ndarray
    rgb: np.ndarray
    depth: np.ndarray
    sem: np.ndarray
    action: np.ndarray
    tables: list[str]
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.action)

    @property
    def n_rays(self) -> int:
        return self.depth.shape[1]

    def sample(self, k: int) -> tuple[Pose, tuple[float, float], Observation, Action]:
        obs = Observation(self.rgb[k], self.depth[k], self.sem[k], self.tables[int(self.world_id[k])])
        return Pose(*self.pose[k]), (float(self.goal[k, 0]), float(self.goal[k, 1])), obs, Action(int(self.action[k]))

    def table_of_rows(self) -> np.ndarray:
        return np.array(self.tables, dtype=object)[self.world_id]

    def iter_jsonl(self) -> Iterator[str]:
        for k in range(len(self)):
            yield json.dumps({
                "world_id": int(self.world_id[k]),
                "episode": int(self.episode[k]),
                "t": int(self.t[k]),
                "pose": self.pose[k].tolist(),
                "goal": self.goal[k].tolist(),
                "rgb": self.rgb[k].tolist(),
                "depth": self.depth[k].tolist(),
                "sem": self.sem[k].tolist(),
                "action": int(self.action[k]),
            })

    def equals(self, other: "DemoDataset") -> bool:
        names = ("world_id", "episode", "t", "pose", "goal", "rgb", "depth", "sem", "action")
        return (self.tables == other.tables
                and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names))

    def subset(self, idx: np.ndarray) -> "DemoDataset":
        names = ("world_id", "episode", "t", "pose", "goal", "rgb", "depth", "sem", "action")
        return DemoDataset(*(getattr(self, n)[idx] for n in names), tables=list(self.tables),
                           provenance=dict(self.provenance))

    @classmethod
    def from_records(cls, rows: list[tuple[int, int, int, Pose, tuple[float, float], Observation, int]],
                     tables: list[str], n_rays: int, provenance: dict | None = None) -> "DemoDataset":
        n = len(rows)
        ds = cls(
            world_id=np.zeros(n, dtype=np.int64),
            episode=np.zeros(n, dtype=np.int64),
            t=np.zeros(n, dtype=np.int64),
            pose=np.zeros((n, 3)),
            goal=np.zeros((n, 2)),
            rgb=np.zeros((n, n_rays, 3)),
            depth=np.zeros((n, n_rays)),
            sem=np.zeros((n, n_rays), dtype=np.int64),
            action=np.zeros(n, dtype=np.int64),
            tables=list(tables),
            provenance=dict(provenance or {}),
        )
        for k, (w, ep, t, pose, goal, obs, a) in enumerate(rows):
            ds.world_id[k], ds.episode[k], ds.t[k] = w, ep, t
            ds.pose[k] = pose.as_list()
            ds.goal[k] = goal
            ds.rgb[k] = obs.rgb
            ds.depth[k] = obs.depth
            ds.sem[k] = obs.semantic
            ds.action[k] = int(a)
        return ds


def sample_episode(world: WorldMap, rng: np.random.Generator, cfg: SimConfig,
                   min_goal_distance: float = 0.0) -> tuple[Pose, tuple[float, float]] | None:
    """Random start pose and goal point; ``None`` for a degenerate pair."""
    start = sample_free_pose(world, rng, agent_radius=cfg.agent_radius, n_headings=cfg.n_headings)
    g = sample_free_pose(world, rng, agent_radius=cfg.agent_radius, n_headings=cfg.n_headings)
    goal = (g.x, g.y)
    d = math.hypot(goal[0] - start.x, goal[1] - start.y)
    if goal_reached(start, goal, cfg.success_radius) or d < min_goal_distance:
        return None
    return start, goal


def generate_demos(maps: Sequence[WorldMap], theme_per_map: Sequence[Theme], episodes_per_map: int,
                   sensor: SensorSpec, seed: int, cfg: SimConfig = SimConfig(),
                   turn_cost: float = DEFAULT_TURN_COST, noise: NoiseModel | None = None,
                   min_goal_distance: float = 0.0) -> DemoDataset:
    """Replay expert plans and record every (pose, goal, observation, action).

    Episode ``e`` of map ``w`` draws from its own generator seeded by
    ``(seed, w, e)``, so output does not depend on iteration order.
    """
    if episodes_per_map < 1:
        raise ValueError("episodes_per_map must be >= 1")
    if len(theme_per_map) != len(maps):
        raise ValueError("need one theme per map")
    rows = []
    skipped = 0
    perceive = None
    if noise is not None and not noise.is_identity:
        perceive = lambda obs, rng: perturb(obs, noise, rng, sensor.max_range)  # noqa: E731
    for w, (world, theme) in enumerate(zip(maps, theme_per_map)):
        for ep in range(episodes_per_map):
            rng = episode_rng(seed, w, ep)
            pair = sample_episode(world, rng, cfg, min_goal_distance)
            if pair is None:
                skipped += 1
                log.info("skipping degenerate episode world=%d episode=%d", w, ep)
                continue
            start, goal = pair
            p = plan(world, start, goal, cfg, turn_cost)
            traj = rollout(PlanFollower(p.actions), world, theme, start, goal, sensor,
                           SimConfig(cfg.turn_angle, cfg.step_size, cfg.agent_radius,
                                     cfg.success_radius, max(cfg.max_steps, len(p))),
                           rng, perceive)
            if not traj.success or traj.collision_count or len(traj) != len(p):
                raise RuntimeError(f"expert replay failed on world {w} episode {ep}")
            for t, rec in enumerate(traj.records):
                rows.append((w, ep, t, rec.pose, goal, rec.observation, int(rec.action)))
    prov = {
        "seed": int(seed),
        "worlds": [{"spec": m.spec.to_dict(), "seed": m.seed, "theme": th.name}
                   for m, th in zip(maps, theme_per_map)],
        "counts": {"episodes": len(maps) * episodes_per_map - skipped, "skipped": skipped,
                   "samples": len(rows)},
        "sensor": sensor.to_dict(),
    }
    return DemoDataset.from_records(rows, [m.table.name for m in maps], sensor.n_rays, prov)
