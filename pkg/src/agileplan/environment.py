"""Procedural benchmark worlds: Poisson forests, convex-shape fields, gap walls.

Every generator is a pure function of its spec (seed included): same spec,
byte-identical scenario. Obstacles are rendered into point clouds by
deterministic surface grids plus an interior lattice, so the sampled-point
collision check cannot tunnel through a solid body.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, PointCloud
from .trajectory import DiscreteTrajectory, InitialState

GOAL_RADIUS = 5.0  # success radius, meters

# rendering defaults: surface grid fine enough that nearest-distance error
# stays well under the 0.2 m vehicle radius; interior lattice spacing under
# 2*r_q/sqrt(3) so no sample point can hide inside a body
SURFACE_SPACING = 0.08
INTERIOR_SPACING = 0.22


@dataclass(frozen=True)
class ForestSpec:
    """Homogeneous Poisson forest in a length x width rectangle centered at the origin."""

    length: float = 60.0
    width: float = 30.0
    intensity: float = 1.0 / 25.0  # trees per square meter
    tree_diameter: float = 0.6
    tree_height: float = 8.0
    seed: int = 0
    flight_height: float = 1.5
    reference_length: float = 40.0
    reference_speed: float = 3.0
    reference_kind: str = "line"  # "line" or "circle" (radius 6 m)
    clear_radius: float = 0.0  # drop trees this close to start/goal (0 = pure process)
    surface_spacing: float = SURFACE_SPACING
    interior_spacing: float = INTERIOR_SPACING

    def __post_init__(self):
        if self.intensity <= 0 or self.length <= 0 or self.width <= 0:
            raise GeometryError("forest intensity and extents must be positive")
        if self.reference_kind not in ("line", "circle"):
            raise GeometryError(f"unknown reference kind {self.reference_kind!r}")


@dataclass(frozen=True)
class ShapeFieldSpec:
    """Poisson field of randomized convex shapes (ellipsoid/cuboid/cylinder)."""

    length: float = 60.0
    width: float = 30.0
    intensity: float = 1.0 / 25.0
    extent_x: tuple = (0.5, 4.0)
    extent_y: tuple = (0.5, 4.0)
    extent_z: tuple = (0.5, 8.0)
    kinds: tuple = ("ellipsoid", "cuboid", "cylinder")
    seed: int = 0
    flight_height: float = 1.5
    reference_length: float = 40.0
    reference_speed: float = 3.0
    clear_radius: float = 0.0
    surface_spacing: float = SURFACE_SPACING
    interior_spacing: float = INTERIOR_SPACING

    def __post_init__(self):
        if self.intensity < 0 or self.length <= 0 or self.width <= 0:
            raise GeometryError("field intensity must be >= 0, extents positive")
        for lo, hi in (self.extent_x, self.extent_y, self.extent_z):
            if not (0 < lo < hi):
                raise GeometryError("shape extent bounds must satisfy 0 < low < high")


@dataclass(frozen=True)
class GapWallSpec:
    """Solid wall with one full-height vertical opening, placed across the reference."""

    wall_length: float = 40.0
    gap_width: float = 0.9
    lateral_offset: float = 0.0  # gap center relative to the start's lateral position
    wall_distance: float = 10.0
    wall_height: float = 10.0
    wall_thickness: float = 0.3
    seed: int = 0
    flight_height: float = 1.5
    reference_length: float = 40.0
    reference_speed: float = 3.0
    surface_spacing: float = SURFACE_SPACING

    def __post_init__(self):
        if not self.gap_width < self.wall_length:
            raise GeometryError("gap must be narrower than the wall")
        if abs(self.lateral_offset) > self.wall_length / 2:
            raise GeometryError("gap offset outside the wall extent")

    @classmethod
    def draw(cls, seed: int, mode: str = "test", **overrides) -> "GapWallSpec":
        """Randomize gap width and offset: test draws U(0.8, 1.0), training U(0.7, 1.2)."""
        rng = np.random.default_rng(seed)
        lo, hi = (0.8, 1.0) if mode == "test" else (0.7, 1.2)
        width = float(rng.uniform(lo, hi))
        offset = float(rng.uniform(-5.0, 5.0))
        return cls(gap_width=width, lateral_offset=offset, seed=seed, **overrides)


@dataclass
class Scenario:
    """A benchmark instance: world cloud, reference to follow, goal, start state."""

    cloud: PointCloud
    reference: DiscreteTrajectory
    goal: np.ndarray
    goal_radius: float = GOAL_RADIUS
    start: InitialState = field(default_factory=lambda: InitialState(np.zeros(3)))

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=float).reshape(3)

    def nominal_speed(self) -> float:
        span = self.reference.times[-1] - self.reference.times[0]
        return self.reference.arc_length() / span if span > 0 else 0.0

    def save(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        self.cloud.save_xyz(os.path.join(outdir, "cloud.xyz"))
        self.reference.to_csv(os.path.join(outdir, "reference.csv"))
        meta = {
            "cloud": "cloud.xyz",
            "reference": "reference.csv",
            "goal": self.goal.tolist(),
            "goal_radius": self.goal_radius,
            "start": {
                "position": self.start.position.tolist(),
                "velocity": self.start.velocity.tolist(),
                "acceleration": self.start.acceleration.tolist(),
            },
        }
        with open(os.path.join(outdir, "scenario.json"), "w") as f:
            json.dump(meta, f, indent=2)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as f:
            meta = json.load(f)
        base = os.path.dirname(os.path.abspath(path))
        cloud = PointCloud.load_xyz(os.path.join(base, meta["cloud"]))
        reference = DiscreteTrajectory.from_csv(os.path.join(base, meta["reference"]))
        start = InitialState(
            meta["start"]["position"],
            meta["start"].get("velocity", np.zeros(3)),
            meta["start"].get("acceleration", np.zeros(3)),
        )
        return cls(cloud, reference, meta["goal"], meta.get("goal_radius", GOAL_RADIUS), start)


# --- obstacle rendering -----------------------------------------------------


def _interior_lattice(lo, hi, spacing):
    if not np.isfinite(spacing):
        return np.empty((0, 3))
    axes = [np.arange(lo[i] + spacing / 2, hi[i], spacing) for i in range(3)]
    if any(len(a) == 0 for a in axes):
        return np.empty((0, 3))
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([v.ravel() for v in g], axis=1)


def cylinder_points(center_xy, radius, z0, z1, surface_spacing=SURFACE_SPACING,
                    interior_spacing=INTERIOR_SPACING, caps=False):
    """Deterministic point sampling of a solid vertical cylinder."""
    cx, cy = center_xy
    h = z1 - z0
    n_az = max(3, int(math.ceil(2 * math.pi * radius / surface_spacing)))
    n_z = max(2, int(math.ceil(h / surface_spacing)) + 1)
    az = np.arange(n_az) * (2 * math.pi / n_az)
    zs = np.linspace(z0, z1, n_z)
    ring = np.stack([cx + radius * np.cos(az), cy + radius * np.sin(az)], axis=1)
    lateral = np.concatenate(
        [np.column_stack([ring, np.full(n_az, z)]) for z in zs], axis=0
    )
    parts = [lateral]
    if caps:
        ticks = np.arange(-radius + surface_spacing / 2, radius, surface_spacing)
        gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
        keep = gx ** 2 + gy ** 2 <= radius ** 2
        disk = np.stack([cx + gx[keep], cy + gy[keep]], axis=1)
        for z in (z0, z1):
            parts.append(np.column_stack([disk, np.full(len(disk), z)]))
    interior = _interior_lattice(
        (cx - radius, cy - radius, z0), (cx + radius, cy + radius, z1), interior_spacing
    )
    if len(interior):
        keep = (interior[:, 0] - cx) ** 2 + (interior[:, 1] - cy) ** 2 < radius ** 2
        parts.append(interior[keep])
    return np.concatenate(parts, axis=0)


def cuboid_points(center, extents, surface_spacing=SURFACE_SPACING,
                  interior_spacing=INTERIOR_SPACING):
    """Solid axis-aligned box; extents are the full side lengths."""
    c = np.asarray(center, dtype=float)
    half = np.asarray(extents, dtype=float) / 2.0
    lo, hi = c - half, c + half
    parts = []
    for ax in range(3):
        u, v = [i for i in range(3) if i != ax]
        us = np.linspace(lo[u], hi[u], max(2, int(math.ceil((hi[u] - lo[u]) / surface_spacing)) + 1))
        vs = np.linspace(lo[v], hi[v], max(2, int(math.ceil((hi[v] - lo[v]) / surface_spacing)) + 1))
        gu, gv = np.meshgrid(us, vs, indexing="ij")
        for w in (lo[ax], hi[ax]):
            face = np.empty((gu.size, 3))
            face[:, ax] = w
            face[:, u] = gu.ravel()
            face[:, v] = gv.ravel()
            parts.append(face)
    interior = _interior_lattice(lo, hi, interior_spacing)
    if len(interior):
        parts.append(interior)
    return np.concatenate(parts, axis=0)


def ellipsoid_points(center, semi_axes, surface_spacing=SURFACE_SPACING,
                     interior_spacing=INTERIOR_SPACING):
    """Solid ellipsoid: Fibonacci-sphere surface scaled per axis, plus interior."""
    c = np.asarray(center, dtype=float)
    s = np.asarray(semi_axes, dtype=float)
    # Thomsen's approximation of the surface area sets the sample count
    p = 1.6075
    ap, bp, cp = s ** p
    area = 4 * math.pi * ((ap * bp + ap * cp + bp * cp) / 3.0) ** (1.0 / p)
    n = max(16, int(math.ceil(area / surface_spacing ** 2)))
    i = np.arange(n)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - 2.0 * (i + 0.5) / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = golden * i
    unit = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    surface = c + unit * s
    parts = [surface]
    interior = _interior_lattice(c - s, c + s, interior_spacing)
    if len(interior):
        keep = np.sum(((interior - c) / s) ** 2, axis=1) < 1.0
        parts.append(interior[keep])
    return np.concatenate(parts, axis=0)


# --- references -------------------------------------------------------------


def line_reference(start_pos, direction, length, speed):
    """Straight reference at 0.1 s spacing; endpoint is the goal."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    n = max(1, int(round(length / (speed * 0.1))))
    times = np.arange(n + 1) * 0.1
    positions = np.asarray(start_pos) + (times * speed)[:, None] * d
    return DiscreteTrajectory(times, positions)


def circle_reference(start_pos, heading, length, speed, radius=6.0):
    """Circular-arc reference of the given arc length (radius 6 m by default)."""
    h = np.asarray(heading, dtype=float)[:2]
    h = h / np.linalg.norm(h)
    left = np.array([-h[1], h[0]])
    center = np.asarray(start_pos[:2]) + radius * left
    phi0 = math.atan2(start_pos[1] - center[1], start_pos[0] - center[0])
    n = max(1, int(round(length / (speed * 0.1))))
    times = np.arange(n + 1) * 0.1
    phi = phi0 + (times * speed) / radius
    positions = np.stack(
        [center[0] + radius * np.cos(phi), center[1] + radius * np.sin(phi),
         np.full(n + 1, start_pos[2])], axis=1,
    )
    return DiscreteTrajectory(times, positions)


def _poisson_centers(rng, length, width, intensity):
    n = rng.poisson(intensity * length * width)
    if n == 0:
        return np.empty((0, 2))
    return rng.uniform([-length / 2, -width / 2], [length / 2, width / 2], size=(n, 2))


def _filter_clearance(centers, keep_clear, radius):
    if radius <= 0 or len(centers) == 0:
        return centers
    ok = np.ones(len(centers), dtype=bool)
    for p in keep_clear:
        ok &= np.linalg.norm(centers - p[None, :2], axis=1) > radius
    return centers[ok]


def _corner_scenario_frame(spec):
    """Start at the region corner, reference heading into the interior."""
    start_pos = np.array([-spec.length / 2, -spec.width / 2, spec.flight_height])
    direction = np.array([spec.length / 2, spec.width / 2, 0.0])
    direction = direction / np.linalg.norm(direction)
    return start_pos, direction


# --- generators -------------------------------------------------------------


def forest_tree_centers(spec: ForestSpec) -> np.ndarray:
    """The (n, 2) tree centers a forest spec renders (after start/goal clearing)."""
    rng = np.random.default_rng(spec.seed)
    centers = _poisson_centers(rng, spec.length, spec.width, spec.intensity)
    start_pos, direction = _corner_scenario_frame(spec)
    goal = start_pos + spec.reference_length * direction
    return _filter_clearance(centers, [start_pos, goal], spec.clear_radius)


def gen_forest(spec: ForestSpec) -> Scenario:
    """Poisson forest of vertical cylinder trees; count ~ Poisson(intensity*area)."""
    centers = forest_tree_centers(spec)
    start_pos, direction = _corner_scenario_frame(spec)
    if spec.reference_kind == "circle":
        reference = circle_reference(start_pos, direction, spec.reference_length, spec.reference_speed)
    else:
        reference = line_reference(start_pos, direction, spec.reference_length, spec.reference_speed)
    goal = reference.positions[-1]
    radius = spec.tree_diameter / 2.0
    parts = [
        cylinder_points((cx, cy), radius, 0.0, spec.tree_height,
                        spec.surface_spacing, spec.interior_spacing)
        for cx, cy in centers
    ]
    cloud = PointCloud(np.concatenate(parts, axis=0) if parts else np.empty((0, 3)))
    return Scenario(cloud, reference, goal, GOAL_RADIUS, InitialState(start_pos))


def shape_field_items(spec: ShapeFieldSpec):
    """The (kind, center_xy, extents) items a shape-field spec renders."""
    rng = np.random.default_rng(spec.seed)
    centers = _poisson_centers(rng, spec.length, spec.width, spec.intensity)
    start_pos, direction = _corner_scenario_frame(spec)
    goal = start_pos + spec.reference_length * direction
    centers = _filter_clearance(centers, [start_pos, goal], spec.clear_radius)
    items = []
    for cx, cy in centers:
        ex = rng.uniform(*spec.extent_x)
        ey = rng.uniform(*spec.extent_y)
        ez = rng.uniform(*spec.extent_z)
        kind = spec.kinds[rng.integers(len(spec.kinds))]
        items.append((kind, (float(cx), float(cy)), (float(ex), float(ey), float(ez))))
    return items


def gen_shapes(spec: ShapeFieldSpec) -> Scenario:
    """Poisson field of ground-seated convex shapes with uniformly drawn extents."""
    start_pos, direction = _corner_scenario_frame(spec)
    reference = line_reference(start_pos, direction, spec.reference_length, spec.reference_speed)
    goal = reference.positions[-1]
    parts = []
    for kind, (cx, cy), (ex, ey, ez) in shape_field_items(spec):
        if kind == "ellipsoid":
            pts = ellipsoid_points((cx, cy, ez / 2), (ex / 2, ey / 2, ez / 2),
                                   spec.surface_spacing, spec.interior_spacing)
        elif kind == "cuboid":
            pts = cuboid_points((cx, cy, ez / 2), (ex, ey, ez),
                                spec.surface_spacing, spec.interior_spacing)
        elif kind == "cylinder":
            pts = cylinder_points((cx, cy), min(ex, ey) / 2, 0.0, ez,
                                  spec.surface_spacing, spec.interior_spacing, caps=True)
        else:
            raise GeometryError(f"unknown shape kind {kind!r}")
        parts.append(pts)
    cloud = PointCloud(np.concatenate(parts, axis=0) if parts else np.empty((0, 3)))
    return Scenario(cloud, reference, goal, GOAL_RADIUS, InitialState(start_pos))


def gen_gap_wall(spec: GapWallSpec) -> Scenario:
    """Wall across the reference with one vertical opening; reference collides by design."""
    start_pos = np.array([0.0, 0.0, spec.flight_height])
    reference = line_reference(start_pos, [1.0, 0.0, 0.0], spec.reference_length, spec.reference_speed)
    goal = reference.positions[-1]

    gap_center = start_pos[1] + spec.lateral_offset
    ys = np.linspace(-spec.wall_length / 2, spec.wall_length / 2,
                     max(2, int(math.ceil(spec.wall_length / spec.surface_spacing)) + 1))
    zs = np.linspace(0.0, spec.wall_height,
                     max(2, int(math.ceil(spec.wall_height / spec.surface_spacing)) + 1))
    gy, gz = np.meshgrid(ys, zs, indexing="ij")
    outside_gap = np.abs(gy - gap_center) > spec.gap_width / 2
    gy, gz = gy[outside_gap], gz[outside_gap]
    wall_x = start_pos[0] + spec.wall_distance
    layers = np.array([-spec.wall_thickness / 2, 0.0, spec.wall_thickness / 2])
    pts = np.concatenate(
        [np.stack([np.full(gy.size, wall_x + dx), gy, gz], axis=1) for dx in layers], axis=0
    )
    return Scenario(PointCloud(pts), reference, goal, GOAL_RADIUS, InitialState(start_pos))


def gen_pole(pole_distance=6.0, pole_diameter=1.5, pole_height=8.0,
             reference_length=20.0, reference_speed=3.0, flight_height=1.5,
             surface_spacing=SURFACE_SPACING, interior_spacing=INTERIOR_SPACING) -> Scenario:
    """Single vertical pole centered on a straight reference; the lateral-evasion benchmark."""
    start_pos = np.array([0.0, 0.0, flight_height])
    reference = line_reference(start_pos, [1.0, 0.0, 0.0], reference_length, reference_speed)
    pts = cylinder_points((pole_distance, 0.0), pole_diameter / 2.0, 0.0, pole_height,
                          surface_spacing, interior_spacing)
    return Scenario(PointCloud(pts), reference, reference.positions[-1],
                    GOAL_RADIUS, InitialState(start_pos))
