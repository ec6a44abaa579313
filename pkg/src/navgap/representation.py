"""Observation -> feature vector under selectable channel sets.

Feature layout (each block present only if its channel is selected):
per-ray depth / max_range, per-ray one-hot navigability (Obstacle,
Ambiguous, Free) or per-ray one-hot semantics over ``UNION_NAMES``,
per-ray RGB, then two goal features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .simulator import Observation
from .worldgen import UNION_NAMES, CategoryTable, NavLabel, Pose, get_table

GOAL_CLIP = 10.0
N_NAV = len(NavLabel)
MIN_DEPTH = 1e-6


@dataclass(frozen=True)
class ChannelSet:
    use_rgb: bool = False
    use_depth: bool = False
    use_semantics: bool = False
    use_navigability: bool = False

    def __post_init__(self):
        if not (self.use_rgb or self.use_depth or self.use_semantics or self.use_navigability):
            raise ValueError("a channel set needs at least one channel")
        if self.use_semantics and self.use_navigability:
            raise ValueError("semantics and navigability channels are mutually exclusive")

    def feature_length(self, n_rays: int, n_categories: int = len(UNION_NAMES), goal: bool = True) -> int:
        n = 0
        if self.use_depth:
            n += n_rays
        if self.use_navigability:
            n += n_rays * N_NAV
        if self.use_semantics:
            n += n_rays * n_categories
        if self.use_rgb:
            n += n_rays * 3
        return n + (2 if goal else 0)

    def layout(self, n_rays: int, n_categories: int = len(UNION_NAMES)) -> tuple[tuple[str, int], ...]:
        out = []
        if self.use_depth:
            out.append(("depth", n_rays))
        if self.use_navigability:
            out.append(("navigability", n_rays * N_NAV))
        if self.use_semantics:
            out.append(("semantics", n_rays * n_categories))
        if self.use_rgb:
            out.append(("rgb", n_rays * 3))
        out.append(("goal", 2))
        return tuple(out)

    def to_dict(self) -> dict:
        return {"use_rgb": self.use_rgb, "use_depth": self.use_depth,
                "use_semantics": self.use_semantics, "use_navigability": self.use_navigability}


PRESETS: dict[str, ChannelSet] = {
    "RGB": ChannelSet(use_rgb=True),
    "SEER": ChannelSet(use_depth=True, use_navigability=True),
    "SEER_no_sem2nav": ChannelSet(use_depth=True, use_semantics=True),
    "DepthOnly": ChannelSet(use_depth=True),
    "NavOnly": ChannelSet(use_navigability=True),
}


def get_preset(name: str) -> ChannelSet:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown channel preset {name!r}; have {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class NoiseModel:
    """Extractor error: relative depth noise and semantic label flips.

    ``depth_blind`` names categories the depth extractor cannot see (glass,
    low-profile obstacles): rays hitting them read ``max_range``.
    """

    depth_noise_sd: float = 0.0
    sem_flip_prob: float = 0.0
    depth_blind: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "depth_blind", tuple(sorted(set(self.depth_blind))))
        if self.depth_noise_sd < 0:
            raise ValueError("depth_noise_sd must be >= 0")
        if not 0 <= self.sem_flip_prob < 0.5:
            raise ValueError("sem_flip_prob must lie in [0, 0.5)")

    @property
    def is_identity(self) -> bool:
        return self.depth_noise_sd == 0 and self.sem_flip_prob == 0 and not self.depth_blind

    def to_dict(self) -> dict:
        return {"depth_noise_sd": self.depth_noise_sd, "sem_flip_prob": self.sem_flip_prob,
                "depth_blind": list(self.depth_blind)}


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    layout: tuple[tuple[str, int], ...]

    def __len__(self) -> int:
        return len(self.values)

    def block(self, name: str) -> np.ndarray:
        start = 0
        for n, size in self.layout:
            if n == name:
                return self.values[start:start + size]
            start += size
        raise KeyError(name)


def sem_to_nav(category_id: int, table: CategoryTable | Mapping[int, NavLabel]) -> NavLabel:
    """Navigability label of a category id under a table or id->label mapping."""
    if isinstance(table, CategoryTable):
        return table.label(category_id)
    try:
        return NavLabel(table[category_id])
    except KeyError:
        raise KeyError(f"category id {category_id} not in navigability mapping") from None


def _wrap_bearing(b: float) -> float:
    b = (b + math.pi) % (2 * math.pi) - math.pi
    if abs(b + math.pi) < 1e-12:
        b = math.pi
    return b


def encode_goal(pose: Pose, goal: tuple[float, float]) -> tuple[float, float]:
    """(clipped distance / GOAL_CLIP, egocentric bearing / pi); directly behind is +1."""
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    dist = min(math.hypot(dx, dy), GOAL_CLIP) / GOAL_CLIP
    if dx == 0.0 and dy == 0.0:
        return dist, 0.0
    return dist, _wrap_bearing(math.atan2(dy, dx) - pose.heading) / math.pi


def encode_goals(poses: np.ndarray, goals: np.ndarray) -> np.ndarray:
    """Vectorised ``encode_goal`` over rows of (x, y, heading) and (gx, gy)."""
    return np.array([encode_goal(Pose(*p), (g[0], g[1])) for p, g in zip(poses, goals)],
                    dtype=np.float64).reshape(len(poses), 2)


def perturb(obs: Observation, noise: NoiseModel, rng: np.random.Generator, max_range: float) -> Observation:
    """Apply extractor error to one observation.

    Blind categories read ``max_range``; depth then gets multiplicative noise
    clamped to (0, max_range], and labels flip uniformly to another id.
    """
    if noise.is_identity:
        return obs
    depth = obs.depth
    if noise.depth_blind:
        table = get_table(obs.table_name)
        blind = [table.id_of(n) for n in noise.depth_blind if n in table.names]
        if blind:
            depth = np.where(np.isin(obs.semantic, blind), max_range, depth)
    if noise.depth_noise_sd > 0:
        eps = rng.normal(0.0, noise.depth_noise_sd, size=depth.shape)
        depth = np.clip(depth * (1.0 + eps), MIN_DEPTH, max_range)
    sem = obs.semantic
    if noise.sem_flip_prob > 0:
        n_cat = len(get_table(obs.table_name))
        flip = rng.random(sem.shape) < noise.sem_flip_prob
        # uniform over the other n_cat - 1 ids
        offset = rng.integers(1, n_cat, size=sem.shape)
        sem = np.where(flip, (sem + offset) % n_cat, sem)
    return Observation(obs.rgb, depth, sem, obs.table_name)


def union_index(table: CategoryTable, union: Sequence[str] = UNION_NAMES) -> np.ndarray:
    """Map a table's ids to positions in the shared semantics layout."""
    try:
        return np.array([union.index(n) for n in table.names], dtype=np.int64)
    except ValueError:
        raise ValueError(f"table {table.name!r} has categories outside the semantics layout") from None


def extract_arrays(depth: np.ndarray, sem: np.ndarray, rgb: np.ndarray, goal_feats: np.ndarray | None,
                   channels: ChannelSet, nav_labels: np.ndarray, union_ids: np.ndarray,
                   max_range: float, n_categories: int = len(UNION_NAMES)) -> np.ndarray:
    """Batch feature extraction.

    ``sem`` holds table-local ids; ``nav_labels`` and ``union_ids`` are
    per-row lookup tables of shape ``(N, max_local_id + 1)`` (or a single
    shared row) translating them to labels and union positions.
    """
    n, r = depth.shape
    blocks = []
    if channels.use_depth:
        blocks.append(depth / max_range)
    if channels.use_navigability:
        lab = np.take_along_axis(np.broadcast_to(nav_labels, (n, nav_labels.shape[-1])), sem, axis=1)
        oh = np.zeros((n, r, N_NAV))
        np.put_along_axis(oh, lab[..., None], 1.0, axis=2)
        blocks.append(oh.reshape(n, r * N_NAV))
    if channels.use_semantics:
        uid = np.take_along_axis(np.broadcast_to(union_ids, (n, union_ids.shape[-1])), sem, axis=1)
        oh = np.zeros((n, r, n_categories))
        np.put_along_axis(oh, uid[..., None], 1.0, axis=2)
        blocks.append(oh.reshape(n, r * n_categories))
    if channels.use_rgb:
        blocks.append(rgb.reshape(n, r * 3))
    if goal_feats is not None:
        blocks.append(goal_feats)
    return np.concatenate(blocks, axis=1)


def extract(obs: Observation, pose: Pose, goal: tuple[float, float], channels: ChannelSet,
            table: CategoryTable, max_range: float = 5.0) -> FeatureVector:
    """Feature vector for one observation under ``channels``.

    ``table`` supplies the navigability mapping and must be the table the
    observation's semantic ids refer to.
    """
    if obs.table_name != table.name:
        raise ValueError(f"observation uses table {obs.table_name!r}, got {table.name!r}")
    if obs.semantic.size and (obs.semantic.min() < 0 or obs.semantic.max() >= len(table)):
        raise ValueError("semantic ids out of range for category table")
    g = np.array([encode_goal(pose, goal)])
    values = extract_arrays(obs.depth[None], obs.semantic[None], obs.rgb[None], g, channels,
                            table.label_array()[None], union_index(table)[None], max_range)[0]
    return FeatureVector(values, channels.layout(obs.n_rays))


def dataset_features(ds, channels: ChannelSet, max_range: float, goal: bool = True) -> np.ndarray:
    """Feature matrix for every sample of a ``DemoDataset``-like object."""
    tables = [get_table(name) for name in ds.tables]
    width = max(len(t) for t in tables)
    nav = np.zeros((len(tables), width), dtype=np.int64)
    uni = np.zeros((len(tables), width), dtype=np.int64)
    for k, t in enumerate(tables):
        nav[k, :len(t)] = t.label_array()
        uni[k, :len(t)] = union_index(t)
    gf = encode_goals(ds.pose, ds.goal) if goal else None
    return extract_arrays(ds.depth, ds.sem, ds.rgb, gf, channels, nav[ds.world_id], uni[ds.world_id],
                          max_range)
