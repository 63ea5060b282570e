"""Deployment scenarios: service area, user drops, terrestrial base stations.

All coordinates are metres. Users live on the ground plane (z = 0); base
station positions are full 3D points. Generation is driven by
``numpy.random.default_rng`` so a (inputs, seed) pair always reproduces the
same scenario bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DIST_UNIFORM = "uniform"
DIST_HOTSPOT = "hotspot"


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Point3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class AreaSpec:
    """Rectangular service area [0, width] x [0, depth] on the ground."""

    width: float
    depth: float

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError(f"area must have positive extent, got {self.width}x{self.depth}")

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.width / 2.0, self.depth / 2.0)

    @property
    def size_m2(self) -> float:
        return self.width * self.depth

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.depth


@dataclass(frozen=True)
class DistributionSpec:
    """How users are scattered over the area.

    ``uniform`` ignores the hotspot fields. ``hotspot`` drops
    ``hotspot_fraction`` of the users as Gaussian clusters around
    ``hotspot_count`` centers (themselves drawn uniformly), resampling any
    draw that lands outside the area; the remainder is uniform.
    """

    kind: str = DIST_UNIFORM
    hotspot_count: int = 2
    hotspot_stddev: float = 5.0
    hotspot_fraction: float = 1.0

    def __post_init__(self):
        if self.kind not in (DIST_UNIFORM, DIST_HOTSPOT):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not 0.0 <= self.hotspot_fraction <= 1.0:
            raise ValueError(f"hotspot_fraction must lie in [0, 1], got {self.hotspot_fraction}")
        if self.kind == DIST_HOTSPOT:
            if self.hotspot_count < 1:
                raise ValueError("hotspot_count must be >= 1")
            if self.hotspot_stddev <= 0:
                raise ValueError("hotspot_stddev must be positive")


@dataclass
class Scenario:
    area: AreaSpec
    users: list[Point3]
    tbs: list[Point3] = field(default_factory=list)
    seed: int = 0

    @property
    def k_total(self) -> int:
        return len(self.users)

    def user_array(self) -> np.ndarray:
        """Users as an (K, 3) array; z is always 0 for generated scenarios."""
        if not self.users:
            return np.zeros((0, 3))
        return np.array([[u.x, u.y, u.z] for u in self.users], dtype=float)

    def to_dict(self) -> dict:
        return {
            "area": {"width": self.area.width, "depth": self.area.depth},
            "users": [[u.x, u.y] for u in self.users],
            "tbs": [[t.x, t.y, t.z] for t in self.tbs],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        area = AreaSpec(float(doc["area"]["width"]), float(doc["area"]["depth"]))
        users = [Point3(float(x), float(y), 0.0) for x, y in doc["users"]]
        tbs = [Point3(float(x), float(y), float(z)) for x, y, z in doc.get("tbs", [])]
        return cls(area=area, users=users, tbs=tbs, seed=int(doc.get("seed", 0)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_tbs(area: AreaSpec, height: float = 0.0) -> list[Point3]:
    """Single terrestrial BS at the area center. Height 0 unless configured."""
    cx, cy = area.centroid
    return [Point3(cx, cy, height)]


def generate_scenario(
    area: AreaSpec,
    k_total: int,
    dist: DistributionSpec | None = None,
    tbs: list[Point3] | None = None,
    seed: int = 0,
) -> Scenario:
    """Draw a reproducible scenario.

    Hotspot users come first in the user list (in draw order), uniform
    remainder after. Every user lies inside the area; Gaussian draws are
    rejection-resampled one user at a time so the stream of RNG consumption
    is unambiguous.
    """
    if k_total < 0:
        raise ValueError("k_total must be >= 0")
    dist = dist or DistributionSpec()
    rng = np.random.default_rng(seed)

    xy = np.zeros((k_total, 2))
    if dist.kind == DIST_UNIFORM:
        xy[:, 0] = rng.uniform(0.0, area.width, k_total)
        xy[:, 1] = rng.uniform(0.0, area.depth, k_total)
    else:
        centers = np.column_stack(
            [
                rng.uniform(0.0, area.width, dist.hotspot_count),
                rng.uniform(0.0, area.depth, dist.hotspot_count),
            ]
        )
        n_hot = round(dist.hotspot_fraction * k_total)
        labels = rng.integers(0, dist.hotspot_count, n_hot)
        for i, lab in enumerate(labels):
            while True:
                p = rng.normal(centers[lab], dist.hotspot_stddev, 2)
                if area.contains(p[0], p[1]):
                    xy[i] = p
                    break
        n_rest = k_total - n_hot
        xy[n_hot:, 0] = rng.uniform(0.0, area.width, n_rest)
        xy[n_hot:, 1] = rng.uniform(0.0, area.depth, n_rest)

    users = [Point3(float(x), float(y), 0.0) for x, y in xy]
    tbs_list = list(tbs) if tbs is not None else default_tbs(area)
    return Scenario(area=area, users=users, tbs=tbs_list, seed=seed)
