"""Procedural 2D worlds with semantic categories, plus visual themes."""
from __future__ import annotations

import enum
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

DEFAULT_RESOLUTION = 0.25
MAX_RETRIES = 100
DEFAULT_AGENT_RADIUS = 0.1


class NavLabel(enum.IntEnum):
    """Navigability of a category. The integer value is the one-hot slot."""

    OBSTACLE = 0
    AMBIGUOUS = 1
    FREE = 2

    @classmethod
    def parse(cls, text: str) -> "NavLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown navigability label {text!r}") from None


@dataclass(frozen=True)
class SemanticCategory:
    id: int
    name: str


@dataclass(frozen=True)
class CategoryTable:
    """Categories of one domain with their navigability labels.

    ``open_name`` is the ambiguous category reported for rays that hit
    nothing within sensor range (ceiling indoors, sky outdoors).
    """

    name: str
    categories: tuple[SemanticCategory, ...]
    labels: tuple[NavLabel, ...]
    open_name: str

    def __post_init__(self):
        ids = [c.id for c in self.categories]
        if ids != list(range(len(ids))):
            raise ValueError("category ids must be contiguous from 0")
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise ValueError("category names must be unique")
        if len(self.labels) != len(self.categories):
            raise ValueError("every category needs exactly one navigability label")
        if self.open_name not in names:
            raise ValueError(f"open category {self.open_name!r} not in table")

    @classmethod
    def build(cls, name: str, entries: Sequence[tuple[str, str]], open_name: str) -> "CategoryTable":
        cats = tuple(SemanticCategory(i, n) for i, (n, _) in enumerate(entries))
        labels = tuple(NavLabel.parse(lab) for _, lab in entries)
        return cls(name, cats, labels, open_name)

    def __len__(self) -> int:
        return len(self.categories)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.categories)

    @property
    def open_id(self) -> int:
        return self.id_of(self.open_name)

    @property
    def nav_mapping(self) -> dict[int, NavLabel]:
        return {c.id: lab for c, lab in zip(self.categories, self.labels)}

    def id_of(self, name: str) -> int:
        for c in self.categories:
            if c.name == name:
                return c.id
        raise KeyError(f"category {name!r} not in table {self.name!r}")

    def label(self, cat_id: int) -> NavLabel:
        if not 0 <= cat_id < len(self.labels):
            raise KeyError(f"category id {cat_id} not in table {self.name!r}")
        return self.labels[cat_id]

    def ids_with(self, label: NavLabel) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab == label)

    def label_array(self) -> np.ndarray:
        return np.array([int(lab) for lab in self.labels], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "categories": [[c.name, self.labels[c.id].name.lower()] for c in self.categories],
            "open": self.open_name,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoryTable":
        return cls.build(d["name"], [tuple(e) for e in d["categories"]], d["open"])

    def with_mapping(self, mapping: Mapping[str, str]) -> "CategoryTable":
        """Copy of this table with labels overridden by a ``{name: label}`` table."""
        unknown = set(mapping) - set(self.names)
        if unknown:
            raise ValueError(f"mapping names unknown categories: {sorted(unknown)}")
        entries = [(n, mapping.get(n, self.labels[i].name.lower())) for i, n in enumerate(self.names)]
        return CategoryTable.build(self.name, entries, self.open_name)


INDOOR = CategoryTable.build(
    "indoor",
    [
        ("wall", "obstacle"),
        ("window", "obstacle"),
        ("furniture", "obstacle"),
        ("floor", "free"),
        ("rug", "free"),
        ("ceiling", "ambiguous"),
    ],
    open_name="ceiling",
)

OUTDOOR = CategoryTable.build(
    "outdoor",
    [
        ("tree", "obstacle"),
        ("person", "obstacle"),
        ("car", "obstacle"),
        ("sky", "ambiguous"),
        ("dirt", "ambiguous"),
        ("pavement", "free"),
        ("grass", "free"),
        ("gravel", "free"),
    ],
    open_name="sky",
)

TABLES: dict[str, CategoryTable] = {t.name: t for t in (INDOOR, OUTDOOR)}

# Layout of the semantics channel: every built-in category, indoor first.
UNION_NAMES: tuple[str, ...] = INDOOR.names + OUTDOOR.names


def load_nav_mapping(path_or_text: str) -> dict[str, NavLabel]:
    """Parse a ``{category_name: "obstacle"|"ambiguous"|"free"}`` JSON table."""
    try:
        raw = json.loads(path_or_text)
    except json.JSONDecodeError:
        with open(path_or_text) as f:
            raw = json.load(f)
    return {k: NavLabel.parse(v) for k, v in raw.items()}


def get_table(name: str) -> CategoryTable:
    try:
        return TABLES[name]
    except KeyError:
        raise ValueError(f"unknown category table {name!r}; have {sorted(TABLES)}") from None


@dataclass(frozen=True)
class Palette:
    """Which categories of a table a generator may paint, and where."""

    table: str = "indoor"
    border: str | None = None
    obstacles: tuple[str, ...] | None = None
    free: tuple[str, ...] | None = None

    def resolve(self) -> tuple[CategoryTable, int, tuple[int, ...], tuple[int, ...]]:
        table = get_table(self.table)
        obs = self.obstacles or tuple(table.names[i] for i in table.ids_with(NavLabel.OBSTACLE))
        free = self.free or tuple(table.names[i] for i in table.ids_with(NavLabel.FREE))
        border = self.border or obs[0]
        obs_ids = tuple(table.id_of(n) for n in obs)
        free_ids = tuple(table.id_of(n) for n in free)
        border_id = table.id_of(border)
        if table.label(border_id) != NavLabel.OBSTACLE:
            raise ValueError(f"border category {border!r} is not an obstacle")
        for i in obs_ids:
            if table.label(i) != NavLabel.OBSTACLE:
                raise ValueError(f"{table.names[i]!r} is not an obstacle category")
        for i in free_ids:
            if table.label(i) != NavLabel.FREE:
                raise ValueError(f"{table.names[i]!r} is not a free category")
        if not obs_ids or not free_ids:
            raise ValueError("palette needs at least one obstacle and one free category")
        return table, border_id, obs_ids, free_ids

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: Mapping | str) -> "Palette":
        if isinstance(d, str):
            return cls(table=d)
        d = dict(d)
        for k in ("obstacles", "free"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class WorldGenSpec:
    width: float
    height: float
    resolution: float = DEFAULT_RESOLUTION
    obstacle_density: float = 0.15
    category_palette: Palette = field(default_factory=Palette)
    blob_min: int = 1
    blob_max: int = 4
    patch_density: float = 0.05

    def validate(self) -> None:
        if self.width < 5 or self.height < 5:
            raise ValueError("world must be at least 5 m on each side")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if not 0 <= self.obstacle_density <= 0.4:
            raise ValueError("obstacle_density must lie in [0, 0.4]")
        if not 1 <= self.blob_min <= self.blob_max:
            raise ValueError("need 1 <= blob_min <= blob_max")
        for side in (self.width, self.height):
            n = side / self.resolution
            if abs(n - round(n)) > 1e-9:
                raise ValueError("width and height must be whole multiples of resolution")
        self.category_palette.resolve()

    @property
    def shape(self) -> tuple[int, int]:
        return int(round(self.height / self.resolution)), int(round(self.width / self.resolution))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["category_palette"] = self.category_palette.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "WorldGenSpec":
        d = dict(d)
        if "category_palette" in d:
            d["category_palette"] = Palette.from_dict(d["category_palette"])
        return cls(**d)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.heading]


class WorldGenError(RuntimeError):
    def __init__(self, msg: str, retries: int):
        super().__init__(f"{msg} (after {retries} retries)")
        self.retries = retries


class WorldMap:
    """Immutable occupancy-plus-semantics grid.

    ``cells[j, i]`` is the category id of the cell spanning
    ``[i*res, (i+1)*res) x [j*res, (j+1)*res)``.
    """

    __slots__ = ("spec", "seed", "cells", "table", "obstacle", "_cache")

    def __init__(self, spec: WorldGenSpec, seed: int, cells: np.ndarray, table: CategoryTable):
        cells = np.array(cells, dtype=np.int16)
        if cells.shape != spec.shape:
            raise ValueError(f"cell grid shape {cells.shape} does not match spec {spec.shape}")
        if cells.min() < 0 or cells.max() >= len(table):
            raise ValueError("cell ids out of range for category table")
        cells.setflags(write=False)
        obstacle = (table.label_array()[cells] == NavLabel.OBSTACLE).astype(np.uint8)
        obstacle.setflags(write=False)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "seed", int(seed))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "obstacle", obstacle)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("WorldMap is immutable")

    @property
    def resolution(self) -> float:
        return self.spec.resolution

    @property
    def width(self) -> float:
        return self.spec.width

    @property
    def height(self) -> float:
        return self.spec.height

    @property
    def nav_mapping(self) -> dict[int, NavLabel]:
        return self.table.nav_mapping

    @property
    def free_mask(self) -> np.ndarray:
        return (self.table.label_array()[self.cells] == NavLabel.FREE)

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (i + 0.5) * self.resolution, (j + 0.5) * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.resolution)), int(math.floor(y / self.resolution))

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width and 0.0 <= y < self.height

    def clearance_mask(self, agent_radius: float) -> np.ndarray:
        """Cells whose center is at least ``agent_radius`` from every obstacle cell."""
        key = ("clear", float(agent_radius))
        if key not in self._cache:
            self._cache[key] = _clearance_mask(self.obstacle, self.resolution, agent_radius)
        return self._cache[key]

    def cached(self, key, factory):
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def __eq__(self, other):
        if not isinstance(other, WorldMap):
            return NotImplemented
        return (self.spec == other.spec and self.seed == other.seed
                and self.table == other.table and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.spec, self.seed, self.cells.tobytes()))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "cells": self.cells.ravel().tolist(),
            "category_table": self.table.to_dict(),
            "nav_mapping": {c.name: self.table.labels[c.id].name.lower() for c in self.table.categories},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WorldMap":
        spec = WorldGenSpec.from_dict(d["spec"])
        table = CategoryTable.from_dict(d["category_table"])
        if "nav_mapping" in d:
            table = table.with_mapping(d["nav_mapping"])
        cells = np.asarray(d["cells"], dtype=np.int16).reshape(spec.shape)
        return cls(spec, d["seed"], cells, table)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WorldMap":
        return cls.from_dict(json.loads(text))


def _clearance_mask(obstacle: np.ndarray, res: float, radius: float) -> np.ndarray:
    ny, nx = obstacle.shape
    ok = obstacle == 0
    reach = int(math.ceil(radius / res)) + 1
    padded = np.pad(obstacle.astype(bool), reach, constant_values=True)
    for dj in range(-reach, reach + 1):
        for di in range(-reach, reach + 1):
            if di == 0 and dj == 0:
                continue
            # distance from a cell center to the nearest point of the cell offset by (di, dj)
            gx = max(0.0, (abs(di) - 0.5) * res)
            gy = max(0.0, (abs(dj) - 0.5) * res)
            if gx * gx + gy * gy >= radius * radius:
                continue
            shifted = padded[reach + dj:reach + dj + ny, reach + di:reach + di + nx]
            ok &= ~shifted
    return ok


def _free_connected(free: np.ndarray) -> bool:
    _, n = ndimage.label(free)
    return n <= 1


def generate_world(spec: WorldGenSpec, seed: int) -> WorldMap:
    """Build a closed world with rectangular obstacle blobs and connected free space.

    Blobs that would split the free region are rejected as they are placed;
    if the requested density cannot be reached the whole map is regenerated,
    up to ``MAX_RETRIES`` times.
    """
    spec.validate()
    table, border_id, obs_ids, free_ids = spec.category_palette.resolve()
    ny, nx = spec.shape
    interior = (ny - 2) * (nx - 2)
    target = int(round(spec.obstacle_density * interior))
    for attempt in range(MAX_RETRIES):
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, attempt])
        cells = np.full((ny, nx), free_ids[0], dtype=np.int16)
        cells[0, :] = cells[-1, :] = border_id
        cells[:, 0] = cells[:, -1] = border_id
        occupied = np.zeros((ny, nx), dtype=bool)
        occupied[0, :] = occupied[-1, :] = occupied[:, 0] = occupied[:, -1] = True
        placed = 0
        budget = 50 + 20 * max(1, target)
        while placed < target and budget > 0:
            budget -= 1
            w = int(rng.integers(spec.blob_min, spec.blob_max + 1))
            h = int(rng.integers(spec.blob_min, spec.blob_max + 1))
            i0 = int(rng.integers(1, max(2, nx - 1 - w + 1)))
            j0 = int(rng.integers(1, max(2, ny - 1 - h + 1)))
            cat = obs_ids[int(rng.integers(len(obs_ids)))]
            block = occupied[j0:j0 + h, i0:i0 + w]
            fresh = int((~block).sum())
            if fresh == 0:
                continue
            trial = occupied.copy()
            trial[j0:j0 + h, i0:i0 + w] = True
            if not _free_connected(~trial):
                continue
            occupied = trial
            cells[j0:j0 + h, i0:i0 + w] = np.where(block, cells[j0:j0 + h, i0:i0 + w], cat)
            placed += fresh
        if placed < target:
            continue
        if len(free_ids) > 1 and spec.patch_density > 0:
            n_patches = int(round(spec.patch_density * interior / 4))
            for _ in range(n_patches):
                w = int(rng.integers(1, 4))
                h = int(rng.integers(1, 4))
                i0 = int(rng.integers(1, nx - 1))
                j0 = int(rng.integers(1, ny - 1))
                cat = free_ids[1 + int(rng.integers(len(free_ids) - 1))]
                sl = (slice(j0, min(j0 + h, ny - 1)), slice(i0, min(i0 + w, nx - 1)))
                cells[sl] = np.where(occupied[sl], cells[sl], cat)
        free = ~occupied
        if free[1:-1, 1:-1].mean() < 0.2 or not _free_connected(free):
            continue
        return WorldMap(spec, seed, cells, table)
    raise WorldGenError(
        f"could not reach obstacle_density={spec.obstacle_density} with connected free space",
        MAX_RETRIES,
    )


def semantic_at(world: WorldMap, point: tuple[float, float]) -> int:
    """Category id of the cell containing ``point``; grid lines resolve to the lower index."""
    x, y = point
    if not world.in_bounds(x, y):
        raise ValueError(f"point {point} outside world bounds {world.width}x{world.height}")
    i, j = world.cell_of(x, y)
    res = world.resolution
    if i > 0 and i * res == x:
        i -= 1
    if j > 0 and j * res == y:
        j -= 1
    return int(world.cells[j, i])


def sample_free_pose(world: WorldMap, rng: np.random.Generator, *,
                     agent_radius: float = DEFAULT_AGENT_RADIUS, n_headings: int = 4) -> Pose:
    """Uniform cell center with clearance ``agent_radius`` and a uniform lattice heading."""
    ok = world.clearance_mask(agent_radius)
    idx = np.flatnonzero(ok.ravel())
    if idx.size == 0:
        raise ValueError("no free cell satisfies the clearance requirement")
    k = int(idx[rng.integers(idx.size)])
    j, i = divmod(k, world.cells.shape[1])
    x, y = world.cell_center(i, j)
    h = int(rng.integers(n_headings))
    return Pose(x, y, h * (2 * math.pi / n_headings))


@dataclass(frozen=True)
class Theme:
    """Visual appearance of a domain.

    ``base_color`` maps category names to RGB in [0, 1]; a table is
    renderable under the theme only if all its names are present.
    """

    name: str
    base_color: Mapping[str, tuple[float, float, float]]
    hue_jitter: float = 0.0
    shading_gain: float = 0.3
    pixel_noise_sd: float = 0.0

    def __post_init__(self):
        if min(self.hue_jitter, self.shading_gain, self.pixel_noise_sd) < 0:
            raise ValueError("theme noise parameters must be non-negative")
        for k, c in self.base_color.items():
            if len(c) != 3 or not all(0.0 <= v <= 1.0 for v in c):
                raise ValueError(f"base color for {k!r} must be an RGB triple in [0,1]")

    def color_table(self, table: CategoryTable) -> np.ndarray:
        missing = [n for n in table.names if n not in self.base_color]
        if missing:
            raise ValueError(f"theme {self.name!r} lacks colors for {missing}")
        return np.array([self.base_color[n] for n in table.names], dtype=np.float64)

    def world_jitter(self, world: WorldMap) -> np.ndarray:
        """Per-(world, category) color offset, fixed for a given world seed."""
        key = ("jitter", self.name, self.hue_jitter)

        def make():
            if self.hue_jitter == 0:
                return np.zeros((len(world.table), 3))
            salt = zlib.crc32(self.name.encode())
            rng = np.random.default_rng([world.seed & 0xFFFFFFFFFFFFFFFF, salt])
            return rng.normal(0.0, self.hue_jitter, size=(len(world.table), 3))

        return world.cached(key, make)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_color": {k: list(v) for k, v in self.base_color.items()},
            "hue_jitter": self.hue_jitter,
            "shading_gain": self.shading_gain,
            "pixel_noise_sd": self.pixel_noise_sd,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Theme":
        d = dict(d)
        d["base_color"] = {k: tuple(v) for k, v in d["base_color"].items()}
        return cls(**d)

    def shifted(self, name: str, delta: Sequence[float], **kw) -> "Theme":
        """Copy with every base color offset by ``delta`` (clipped to [0, 1])."""
        cols = {k: tuple(float(np.clip(c + dv, 0.0, 1.0)) for c, dv in zip(v, delta))
                for k, v in self.base_color.items()}
        params = dict(hue_jitter=self.hue_jitter, shading_gain=self.shading_gain,
                      pixel_noise_sd=self.pixel_noise_sd)
        params.update(kw)
        return Theme(name, cols, **params)


SIM_THEME = Theme(
    "sim",
    {
        "wall": (0.85, 0.82, 0.75),
        "window": (0.55, 0.70, 0.85),
        "furniture": (0.55, 0.35, 0.20),
        "floor": (0.60, 0.50, 0.40),
        "rug": (0.60, 0.20, 0.25),
        "ceiling": (0.95, 0.95, 0.95),
    },
    hue_jitter=0.03,
    shading_gain=0.3,
    pixel_noise_sd=0.02,
)

LAB_THEME = Theme(
    "lab",
    {
        "wall": (0.35, 0.45, 0.60),
        "window": (0.20, 0.30, 0.35),
        "furniture": (0.15, 0.15, 0.18),
        "floor": (0.30, 0.30, 0.32),
        "rug": (0.25, 0.35, 0.25),
        "ceiling": (0.75, 0.80, 0.90),
    },
    hue_jitter=0.05,
    shading_gain=0.5,
    pixel_noise_sd=0.04,
)

CORRIDOR_THEME = Theme(
    "corridor",
    {
        "wall": (0.95, 0.95, 0.60),
        "window": (0.80, 0.90, 1.00),
        "furniture": (0.75, 0.10, 0.10),
        "floor": (0.85, 0.85, 0.80),
        "rug": (0.30, 0.30, 0.60),
        "ceiling": (0.40, 0.40, 0.40),
    },
    hue_jitter=0.05,
    shading_gain=0.15,
    pixel_noise_sd=0.04,
)

OUTDOOR_THEME = Theme(
    "outdoor",
    {
        "tree": (0.15, 0.45, 0.12),
        "person": (0.80, 0.55, 0.45),
        "car": (0.70, 0.10, 0.10),
        "sky": (0.45, 0.65, 0.95),
        "dirt": (0.50, 0.40, 0.25),
        "pavement": (0.45, 0.45, 0.45),
        "grass": (0.25, 0.60, 0.20),
        "gravel": (0.55, 0.52, 0.48),
    },
    hue_jitter=0.06,
    shading_gain=0.1,
    pixel_noise_sd=0.05,
)

THEMES: dict[str, Theme] = {t.name: t for t in (SIM_THEME, LAB_THEME, CORRIDOR_THEME, OUTDOOR_THEME)}


def get_theme(name: str) -> Theme:
    try:
        return THEMES[name]
    except KeyError:
        raise ValueError(f"unknown theme {name!r}; have {sorted(THEMES)}") from None
