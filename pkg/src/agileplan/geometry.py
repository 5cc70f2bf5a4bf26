"""Point-cloud world model, nearest-obstacle queries and the collision cost field.

The environment is a set of 3D obstacle points. Clearance queries go through
an exact k-d tree, so a nearest-distance lookup always equals the minimum
Euclidean distance over all points. The collision penalty is a truncated
quadratic of the clearance: 4 at contact, zero beyond two vehicle radii.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


class GeometryError(ValueError):
    """Invalid geometric input (negative distance, malformed cloud file...)."""


@dataclass(frozen=True)
class CollisionModel:
    """Spherical vehicle model; r_q is the sphere radius in meters."""

    r_q: float = 0.2

    def __post_init__(self):
        if not self.r_q > 0:
            raise GeometryError(f"vehicle radius must be positive, got {self.r_q}")


class PointCloud:
    """Immutable set of 3D obstacle points with an exact nearest-neighbor index.

    An empty cloud is allowed and behaves as "no obstacles": distance queries
    return +inf.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if pts.size and not np.all(np.isfinite(pts)):
            raise GeometryError("cloud points must be finite")
        pts.setflags(write=False)
        self._points = pts
        self._tree = cKDTree(pts) if len(pts) else None

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def nearest_distance(self, p) -> float:
        """Exact Euclidean distance from p to the closest cloud point."""
        if self._tree is None:
            return np.inf
        d, _ = self._tree.query(np.asarray(p, dtype=float))
        return float(d)

    def nearest_distances(self, points) -> np.ndarray:
        """Vectorized nearest_distance over an (n, 3) array of query points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(pts), np.inf)
        d, _ = self._tree.query(pts)
        return d

    def clearances_capped(self, points, cap: float) -> np.ndarray:
        """Nearest distances, +inf beyond cap.

        Exact wherever the result is <= cap; the bounded search prunes far
        harder than a full query, which matters inside sampling loops where
        only distances below the cost-truncation radius are informative.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self._tree is None:
            return np.full(len(pts), np.inf)
        d, _ = self._tree.query(pts, distance_upper_bound=cap)
        return d

    # --- serialization -----------------------------------------------------

    def save_xyz(self, path):
        """Write one 'x y z' triple per line (meters)."""
        with open(path, "w") as f:
            for x, y, z in self._points:
                f.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")

    @classmethod
    def load_xyz(cls, path) -> "PointCloud":
        """Read a plain-text XYZ file; '#' starts a comment."""
        rows = []
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    continue
                parts = body.split()
                if len(parts) != 3:
                    raise GeometryError(f"{path}:{lineno}: expected 3 values, got {len(parts)}")
                rows.append([float(v) for v in parts])
        return cls(rows)

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self._points.tolist(), f)

    @classmethod
    def load_json(cls, path) -> "PointCloud":
        with open(path) as f:
            return cls(json.load(f))


def collision_cost(model: CollisionModel, d_c: float) -> float:
    """Truncated-quadratic collision penalty of clearance d_c.

    Zero for d_c > 2*r_q, otherwise -d_c^2/r_q^2 + 4; continuous at the
    truncation boundary and equal to 4 at contact for any r_q.
    """
    if d_c < 0:
        raise GeometryError(f"clearance must be non-negative, got {d_c}")
    if d_c > 2.0 * model.r_q:
        return 0.0
    return -(d_c * d_c) / (model.r_q * model.r_q) + 4.0


def collision_cost_array(model: CollisionModel, d_c) -> np.ndarray:
    """Vectorized collision_cost; infinite clearance maps to zero cost."""
    d = np.asarray(d_c, dtype=float)
    if np.any(d < 0):
        raise GeometryError("clearance must be non-negative")
    with np.errstate(invalid="ignore"):
        cost = -np.square(d) / (model.r_q * model.r_q) + 4.0
    return np.where(d > 2.0 * model.r_q, 0.0, cost)


def in_collision(cloud: PointCloud, model: CollisionModel, traj) -> bool:
    """True iff any trajectory sample position is closer than r_q to the cloud.

    Only the discrete samples are checked, not the continuous sweep between
    them; callers choose a sampling resolution accordingly.
    """
    d = cloud.clearances_capped(traj.positions, 2.0 * model.r_q)
    return bool(np.any(d < model.r_q))
