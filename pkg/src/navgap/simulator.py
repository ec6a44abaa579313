"""Discrete-action agent dynamics and the ray sensor."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .worldgen import DEFAULT_AGENT_RADIUS, Pose, Theme, WorldMap

TWO_PI = 2.0 * math.pi


class Action(enum.IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    GO_FORWARD = 2


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SensorSpec:
    n_rays: int = 64
    fov: float = math.pi / 2
    max_range: float = 5.0

    def __post_init__(self):
        if self.n_rays < 1:
            raise ValueError("n_rays must be positive")
        if not 0 < self.fov <= math.pi:
            raise ValueError("fov must lie in (0, pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    def angles(self, heading: float) -> np.ndarray:
        """Ray directions, evenly spread over the field of view, right to left."""
        if self.n_rays == 1:
            return np.array([heading])
        return heading + np.linspace(-self.fov / 2, self.fov / 2, self.n_rays)

    def to_dict(self) -> dict:
        return {"n_rays": self.n_rays, "fov": self.fov, "max_range": self.max_range}


@dataclass(frozen=True)
class SimConfig:
    turn_angle: float = math.pi / 2
    step_size: float = 0.25
    agent_radius: float = DEFAULT_AGENT_RADIUS
    success_radius: float = 0.5
    max_steps: int = 200

    @property
    def n_headings(self) -> int:
        n = TWO_PI / self.turn_angle
        if abs(n - round(n)) > 1e-9:
            raise ValueError("turn_angle must divide a full turn")
        return int(round(n))

    def to_dict(self) -> dict:
        return {
            "turn_angle": self.turn_angle,
            "step_size": self.step_size,
            "agent_radius": self.agent_radius,
            "success_radius": self.success_radius,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True, eq=False)
class Observation:
    """Ray-aligned sensor readings. ``semantic`` ids index the ``table_name`` table."""

    rgb: np.ndarray
    depth: np.ndarray
    semantic: np.ndarray
    table_name: str

    def __post_init__(self):
        n = len(self.depth)
        if self.rgb.shape != (n, 3) or self.semantic.shape != (n,):
            raise ValueError("observation channels must be ray-aligned")

    @property
    def n_rays(self) -> int:
        return len(self.depth)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (self.table_name == other.table_name
                and np.array_equal(self.rgb, other.rgb)
                and np.array_equal(self.depth, other.depth)
                and np.array_equal(self.semantic, other.semantic))

    __hash__ = None


@dataclass(frozen=True)
class StepResult:
    pose: Pose
    collided: bool


@dataclass(frozen=True)
class StepRecord:
    pose: Pose
    goal: tuple[float, float]
    observation: Observation
    action: Action


@dataclass
class Trajectory:
    records: list[StepRecord] = field(default_factory=list)
    outcome: Outcome = Outcome.TIMEOUT
    path_length: float = 0.0
    collision_count: int = 0
    final_pose: Pose | None = None

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS

    def __len__(self) -> int:
        return len(self.records)


def _snap_heading(heading: float, turn_angle: float) -> float:
    k = heading / turn_angle
    if abs(k - round(k)) < 1e-9:
        n = int(round(TWO_PI / turn_angle))
        return (int(round(k)) % n) * turn_angle
    return heading % TWO_PI


def direction(heading: float) -> tuple[float, float]:
    """Unit vector for ``heading`` with round-off below 1e-12 cleared."""
    c = math.cos(heading)
    s = math.sin(heading)
    return (0.0 if abs(c) < 1e-12 else c), (0.0 if abs(s) < 1e-12 else s)


def has_clearance(world: WorldMap, x: float, y: float, radius: float) -> bool:
    return not kernels.swept_collision(world.obstacle, world.resolution, x, y, x, y, radius)


def step(world: WorldMap, pose: Pose, action: Action, cfg: SimConfig = SimConfig()) -> StepResult:
    """Apply one action. A blocked forward move leaves the pose unchanged."""
    action = Action(action)
    if action is Action.TURN_LEFT:
        return StepResult(Pose(pose.x, pose.y, _snap_heading(pose.heading + cfg.turn_angle, cfg.turn_angle)), False)
    if action is Action.TURN_RIGHT:
        return StepResult(Pose(pose.x, pose.y, _snap_heading(pose.heading - cfg.turn_angle, cfg.turn_angle)), False)
    dx, dy = direction(pose.heading)
    nx_ = pose.x + cfg.step_size * dx
    ny_ = pose.y + cfg.step_size * dy
    if kernels.swept_collision(world.obstacle, world.resolution, pose.x, pose.y, nx_, ny_, cfg.agent_radius):
        return StepResult(pose, True)
    return StepResult(Pose(nx_, ny_, pose.heading), False)


def render(world: WorldMap, theme: Theme, pose: Pose, sensor: SensorSpec,
           rng: np.random.Generator | None = None) -> Observation:
    """Cast ``sensor.n_rays`` rays and shade the hits with ``theme``.

    Rays that reach ``max_range`` report the table's open category.
    """
    depth, hit = kernels.raycast(world.obstacle, world.cells, world.resolution,
                                 pose.x, pose.y, sensor.angles(pose.heading), sensor.max_range)
    sem = np.where(hit < 0, world.table.open_id, hit).astype(np.int64)
    colors = theme.color_table(world.table)
    shade = 1.0 / (1.0 + theme.shading_gain * depth)
    rgb = colors[sem] * shade[:, None] + theme.world_jitter(world)[sem]
    if theme.pixel_noise_sd > 0:
        if rng is None:
            raise ValueError("pixel noise requires an rng")
        rgb = rgb + rng.normal(0.0, theme.pixel_noise_sd, size=rgb.shape)
    np.clip(rgb, 0.0, 1.0, out=rgb)
    return Observation(rgb, depth, sem, world.table.name)


def goal_reached(pose: Pose, goal: tuple[float, float], success_radius: float) -> bool:
    return math.hypot(goal[0] - pose.x, goal[1] - pose.y) <= success_radius


Policy = Callable[[Pose, tuple[float, float], Observation], int]
Perceive = Callable[[Observation, np.random.Generator], Observation]


def rollout(act: Policy, world: WorldMap, theme: Theme, start: Pose, goal: tuple[float, float],
            sensor: SensorSpec, cfg: SimConfig, rng: np.random.Generator,
            perceive: Perceive | None = None) -> Trajectory:
    """Run ``act`` from ``start`` until the goal is reached or ``cfg.max_steps`` actions.

    ``perceive`` (if given) post-processes each rendered observation, e.g.
    to inject extractor noise; the recorded observation is the perceived one.
    """
    traj = Trajectory()
    pose = start
    goal = (float(goal[0]), float(goal[1]))
    for _ in range(cfg.max_steps):
        if goal_reached(pose, goal, cfg.success_radius):
            break
        obs = render(world, theme, pose, sensor, rng)
        if perceive is not None:
            obs = perceive(obs, rng)
        a = Action(act(pose, goal, obs))
        traj.records.append(StepRecord(pose, goal, obs, a))
        res = step(world, pose, a, cfg)
        if res.collided:
            traj.collision_count += 1
        elif a is Action.GO_FORWARD:
            traj.path_length += cfg.step_size
        pose = res.pose
    traj.final_pose = pose
    traj.outcome = Outcome.SUCCESS if goal_reached(pose, goal, cfg.success_radius) else Outcome.TIMEOUT
    return traj


def episode_rng(global_seed: int, *keys: int) -> np.random.Generator:
    """Private generator for one episode, independent of execution order."""
    return np.random.default_rng([int(global_seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])


def trajectory_to_jsonl(traj: Trajectory, world_id: int, episode: int) -> Iterator[str]:
    for t, rec in enumerate(traj.records):
        yield json.dumps({
            "world_id": world_id,
            "episode": episode,
            "t": t,
            "pose": rec.pose.as_list(),
            "goal": list(rec.goal),
            "rgb": rec.observation.rgb.tolist(),
            "depth": rec.observation.depth.tolist(),
            "sem": rec.observation.semantic.tolist(),
            "action": int(rec.action),
        })


def records_from_jsonl(lines: Iterable[str], table_names: Sequence[str]) -> Iterator[tuple[int, int, int, StepRecord]]:
    """Parse trajectory lines into ``(world_id, episode, t, StepRecord)``."""
    for line in lines:
        d = json.loads(line)
        obs = Observation(np.asarray(d["rgb"], dtype=np.float64).reshape(-1, 3),
                          np.asarray(d["depth"], dtype=np.float64),
                          np.asarray(d["sem"], dtype=np.int64),
                          table_names[d["world_id"]])
        rec = StepRecord(Pose(*d["pose"]), tuple(d["goal"]), obs, Action(d["action"]))
        yield d["world_id"], d["episode"], d["t"], rec
