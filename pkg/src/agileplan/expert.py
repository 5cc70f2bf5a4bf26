"""The privileged planner: samples a distribution of collision-free trajectories.

Planning is cast as sampling from an unnormalized density exp(-cost), where
the cost penalizes obstacle proximity (truncated quadratic, weighted by
lambda_c) and deviation from a reference window (quadratic in Q). A
Metropolis-Hastings chain explores the 9-dimensional space of B-spline
control points expressed in spherical coordinates around the vehicle; the
proposal is an additive Gaussian whose variance steps through the schedule
{2, 5, 10} over the sample budget. After sampling, in-collision states are
discarded and the lowest-cost distinct survivors become the label.

The chain kernel is generic over R^d so it can be validated against analytic
1-D targets independently of the planning cost.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .environment import Scenario
from .geometry import CollisionModel, PointCloud, collision_cost_array
from .trajectory import (
    CubicBSpline,
    DiscreteTrajectory,
    InitialState,
    bspline_basis,
    discretize,
    eq4_times,
)


class ExpertError(ValueError):
    pass


@dataclass(frozen=True)
class ExpertConfig:
    lambda_c: float = 1000.0
    q_weight: np.ndarray = field(default_factory=lambda: np.eye(3))
    total_samples: int = 50000
    proposal_variances: tuple = (2.0, 5.0, 10.0)
    switch_every: int = 16000
    horizon: float = 1.0
    top_k: int = 3
    seed: int = 0
    dedup_distance: float = 0.1
    collision_model: CollisionModel = field(default_factory=CollisionModel)

    def __post_init__(self):
        q = np.asarray(self.q_weight, dtype=float).reshape(3, 3)
        if not np.allclose(q, q.T, atol=1e-12):
            raise ExpertError("Q must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) < -1e-12:
            raise ExpertError("Q must be positive semidefinite")
        q.setflags(write=False)
        object.__setattr__(self, "q_weight", q)
        if any(v <= 0 for v in self.proposal_variances):
            raise ExpertError("proposal variances must be positive")
        if self.total_samples < self.top_k:
            raise ExpertError("need at least top_k samples")
        if self.switch_every <= 0:
            raise ExpertError("switch_every must be positive")

    def proposal_stds(self) -> np.ndarray:
        """Per-step proposal standard deviations under the variance schedule."""
        idx = np.minimum(np.arange(self.total_samples) // self.switch_every,
                         len(self.proposal_variances) - 1)
        return np.sqrt(np.asarray(self.proposal_variances, dtype=float))[idx]

    def scaled(self, total_samples: int) -> "ExpertConfig":
        """Same config with a smaller budget; schedule switches scale proportionally."""
        frac = self.switch_every / self.total_samples
        return replace(self, total_samples=total_samples,
                       switch_every=max(1, int(round(frac * total_samples))))


@dataclass
class ExpertLabel:
    """Up to top_k collision-free trajectories, cost-ascending, plus their splines."""

    trajectories: list
    costs: list
    splines: list
    acceptance_rate: float = 0.0

    @property
    def feasible(self) -> bool:
        return len(self.trajectories) > 0


@dataclass
class GlobalPlan:
    waypoints: np.ndarray | None
    trajectory: DiscreteTrajectory | None
    collision_free: bool
    blocked: bool


# --- costs ------------------------------------------------------------------


def trajectory_cost(traj: DiscreteTrajectory, ref: DiscreteTrajectory,
                    cloud: PointCloud, cfg: ExpertConfig) -> float:
    """Discrete planning cost: dt * sum_i [lambda_c * C(d_i) + dev_i^T Q dev_i]."""
    if len(traj) != len(ref) or not np.allclose(traj.times, ref.times, atol=1e-9):
        raise ExpertError("trajectory and reference sample times differ")
    dt = traj.dt
    d = cloud.nearest_distances(traj.positions)
    coll = float(np.sum(collision_cost_array(cfg.collision_model, d)))
    dev = traj.positions - ref.positions
    quad = float(np.einsum("ij,jk,ik->", dev, cfg.q_weight, dev))
    return dt * (cfg.lambda_c * coll + quad)


def score(traj, ref, cloud, cfg) -> float:
    """exp(-cost); strictly positive in exact arithmetic (may underflow to 0.0)."""
    return math.exp(-trajectory_cost(traj, ref, cloud, cfg))


# --- spherical control points -----------------------------------------------


def heading_frame(direction) -> np.ndarray:
    """Orthonormal frame (columns x,y,z) with x along the heading, z up-ish."""
    d = np.asarray(direction, dtype=float)
    n = np.linalg.norm(d)
    x = d / n if n > 1e-12 else np.array([1.0, 0.0, 0.0])
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(x, up)) > 0.999:
        up = np.array([1.0, 0.0, 0.0])
    y = np.cross(up, x)
    y /= np.linalg.norm(y)
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=1)


def spherical_to_cartesian(sph) -> np.ndarray:
    """(..., 3) [r, azimuth theta, elevation phi] -> (..., 3) xyz in the frame."""
    sph = np.asarray(sph, dtype=float)
    r, th, ph = sph[..., 0], sph[..., 1], sph[..., 2]
    cp = np.cos(ph)
    return np.stack([r * cp * np.cos(th), r * cp * np.sin(th), r * np.sin(ph)], axis=-1)


def cartesian_to_spherical(xyz) -> np.ndarray:
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    th = np.arctan2(y, x)
    ph = np.arctan2(z, np.hypot(x, y))
    return np.stack([r, th, ph], axis=-1)


def normalize_spherical(sph) -> np.ndarray:
    """Wrap to the canonical representation: r >= 0, theta in (-pi, pi],
    phi in [-pi/2, pi/2]; maps to the same Cartesian point."""
    out = np.array(sph, dtype=float)
    r, th, ph = out[..., 0], out[..., 1], out[..., 2]
    neg = r < 0
    r[neg] = -r[neg]
    th[neg] += math.pi
    ph[neg] = -ph[neg]
    ph[:] = np.mod(ph + math.pi, 2 * math.pi) - math.pi  # phi into (-pi, pi]
    over = ph > math.pi / 2
    ph[over] = math.pi - ph[over]
    th[over] += math.pi
    under = ph < -math.pi / 2
    ph[under] = -math.pi - ph[under]
    th[under] += math.pi
    th[:] = math.pi - np.mod(math.pi - th, 2 * math.pi)  # theta into (-pi, pi]
    return out


# --- the chain kernel ---------------------------------------------------------


@dataclass
class ChainResult:
    states: np.ndarray       # (n, d) state after each step
    log_scores: np.ndarray   # (n,)
    log_alphas: np.ndarray   # (n,) log acceptance probability of each proposal
    accepted: np.ndarray     # (n,) bool

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean())


def mh_chain(log_score, x0, n_steps: int, proposal_stds, rng) -> ChainResult:
    """Metropolis-Hastings with a symmetric Gaussian random-walk proposal.

    ``proposal_stds`` is a per-step scalar std (len n_steps array). The accept
    test runs in log space, so tiny scores never underflow the ratio. A
    proposal is accepted with probability min(1, s'/s).
    """
    x = np.array(x0, dtype=float).reshape(-1)
    d = len(x)
    stds = np.asarray(proposal_stds, dtype=float)
    if len(stds) != n_steps:
        raise ExpertError("need one proposal std per step")
    lx = float(log_score(x))
    if not np.isfinite(lx):
        raise ExpertError("initial state has non-finite log score")
    noise = rng.standard_normal((n_steps, d))
    log_u = np.log(rng.random(n_steps))
    states = np.empty((n_steps, d))
    log_scores = np.empty(n_steps)
    log_alphas = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=bool)
    for i in range(n_steps):
        xp = x + stds[i] * noise[i]
        lp = float(log_score(xp))
        delta = lp - lx
        log_alphas[i] = min(0.0, delta)
        if log_u[i] < delta:
            x = xp
            lx = lp
            accepted[i] = True
        states[i] = x
        log_scores[i] = lx
    return ChainResult(states, log_scores, log_alphas, accepted)


# --- sampling trajectories ----------------------------------------------------


def _window_direction(window: DiscreteTrajectory, origin) -> np.ndarray:
    d = window.positions[-1] - origin
    return d if np.linalg.norm(d) > 1e-9 else np.array([1.0, 0.0, 0.0])


def _seed_control_points(window: DiscreteTrajectory, origin, frame, horizon) -> np.ndarray:
    """Start the chain on the reference window: control points at its thirds."""
    ts = np.array([horizon / 3, 2 * horizon / 3, horizon])
    cart = np.stack(
        [np.interp(ts, window.times, window.positions[:, k]) for k in range(3)], axis=1
    )
    return cartesian_to_spherical((cart - origin) @ frame)


def mh_sample(ref: DiscreteTrajectory, cloud: PointCloud, init: InitialState,
              cfg: ExpertConfig, return_chain: bool = True, x0=None):
    """Sample trajectory space around the reference window; extract the label.

    The chain starts on the reference window itself unless x0 (spherical
    control points, any shape reshapable to (3, 3)) overrides it. Returns
    (chain, label) where chain is the (n, 3, 3) sequence of visited spherical
    control points (canonically wrapped) or None when return_chain is False.
    """
    n_eq4 = len(eq4_times(cfg.horizon))
    if len(ref) != n_eq4 or not np.allclose(ref.times, eq4_times(cfg.horizon), atol=1e-9):
        raise ExpertError("reference window must use the 0.1 s horizon layout")

    origin = init.position
    frame = heading_frame(_window_direction(ref, origin))
    b0, b1, b2 = bspline_basis(ref.times, cfg.horizon)
    ref_pos = ref.positions
    lam, q, model = cfg.lambda_c, cfg.q_weight, cfg.collision_model
    r_q2 = model.r_q * model.r_q
    trunc = 2.0 * model.r_q
    cap = trunc * 1.001  # bounded clearance query is exact for the truncated cost
    dt = float(ref.times[1] - ref.times[0]) if len(ref) > 1 else 0.1
    empty = len(cloud) == 0

    q_is_identity = np.array_equal(q, np.eye(3))
    frame_t = frame.T
    dboor = np.empty((4, 3))
    dboor[0] = origin

    def positions_of(flat_sph):
        sph = flat_sph.reshape(3, 3)
        r, th, ph = sph[:, 0], sph[:, 1], sph[:, 2]
        rc = r * np.cos(ph)
        cart = np.empty((3, 3))
        cart[:, 0] = rc * np.cos(th)
        cart[:, 1] = rc * np.sin(th)
        cart[:, 2] = r * np.sin(ph)
        dboor[1:] = origin + cart @ frame_t
        return b0 @ dboor

    def neg_cost(flat_sph):
        pos = positions_of(flat_sph)
        dev = pos - ref_pos
        if q_is_identity:
            quad = float(np.einsum("ij,ij->", dev, dev))
        else:
            quad = float(np.einsum("ij,jk,ik->", dev, q, dev))
        if empty:
            return -dt * quad
        dcl = cloud.clearances_capped(pos, cap)
        near = dcl <= trunc
        coll = np.sum(-np.square(dcl[near]) / r_q2 + 4.0) if near.any() else 0.0
        return -dt * (lam * coll + quad)

    rng = np.random.default_rng(cfg.seed)
    if x0 is None:
        x0 = _seed_control_points(ref, origin, frame, cfg.horizon)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    chain = mh_chain(neg_cost, x0, cfg.total_samples, cfg.proposal_stds(), rng)

    # distinct visited states, re-evaluated in one vectorized pass
    uniq = np.concatenate([x0[None, :], chain.states[chain.accepted]], axis=0)
    cart = spherical_to_cartesian(uniq.reshape(-1, 3, 3))
    dboor = np.empty((len(uniq), 4, 3))
    dboor[:, 0] = origin
    dboor[:, 1:] = origin + cart @ frame.T
    pos = np.einsum("ij,mjk->mik", b0, dboor)
    dev = pos - ref_pos[None]
    quad = np.einsum("mij,jk,mik->m", dev, q, dev)
    if empty:
        clearance = np.full(len(uniq), np.inf)
        costs = dt * quad
    else:
        dcl = cloud.clearances_capped(pos.reshape(-1, 3), cap).reshape(len(uniq), -1)
        with np.errstate(invalid="ignore"):
            coll = np.where(dcl > trunc, 0.0, -np.square(dcl) / r_q2 + 4.0).sum(axis=1)
        clearance = dcl.min(axis=1)
        costs = dt * (lam * coll + quad)

    free = clearance >= model.r_q
    order = np.argsort(costs, kind="stable")
    picked = []
    for idx in order:
        if not free[idx]:
            continue
        if any(np.max(np.linalg.norm(pos[idx] - pos[j], axis=1)) < cfg.dedup_distance
               for j in picked):
            continue
        picked.append(int(idx))
        if len(picked) == cfg.top_k:
            break

    trajectories, splines, out_costs = [], [], []
    for idx in picked:
        spline = CubicBSpline(origin, dboor[idx, 1:], cfg.horizon)
        trajectories.append(discretize(spline))
        splines.append(spline)
        out_costs.append(float(costs[idx]))
    label = ExpertLabel(trajectories, out_costs, splines, chain.acceptance_rate)
    chain_sph = normalize_spherical(chain.states.reshape(-1, 3, 3)) if return_chain else None
    return chain_sph, label


# --- reference windowing ------------------------------------------------------


def path_window(points, position, speed: float, horizon: float = 1.0,
                dt: float = 0.1) -> DiscreteTrajectory:
    """Time-local window of a path: project onto the polyline, advance at speed.

    Clamps at the path end, so near the goal the window converges to the goal
    point. This is how the receding horizon advances with the vehicle.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    times = np.arange(1, int(round(horizon / dt)) + 1) * dt
    if len(pts) == 1:
        return DiscreteTrajectory(times, np.repeat(pts, len(times), axis=0))
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    keep = seg_len > 1e-12
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    p = np.asarray(position, dtype=float)
    rel = p[None, :] - pts[:-1]
    tproj = np.zeros(len(seg))
    tproj[keep] = np.clip(np.einsum("ij,ij->i", rel[keep], seg[keep]) / seg_len[keep] ** 2, 0.0, 1.0)
    closest = pts[:-1] + tproj[:, None] * seg
    i = int(np.argmin(np.linalg.norm(closest - p[None, :], axis=1)))
    s0 = cum[i] + tproj[i] * seg_len[i]
    s = np.minimum(s0 + speed * times, cum[-1])
    out = np.stack([np.interp(s, cum, pts[:, k]) for k in range(3)], axis=1)
    return DiscreteTrajectory(times, out)


# --- global planning ----------------------------------------------------------

_NEIGHBORS = np.array(
    [[dx, dy, dz] for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
     if (dx, dy, dz) != (0, 0, 0)],
    dtype=np.int64,
)
_NEIGHBOR_COST = np.linalg.norm(_NEIGHBORS, axis=1)
_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)


def _inflate(occ: np.ndarray, resolution: float, radius: float) -> np.ndarray:
    reach = int(math.ceil((radius + resolution / 2) / resolution))
    ticks = np.arange(-reach, reach + 1)
    gx, gy, gz = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    ball = (gx ** 2 + gy ** 2 + gz ** 2) * resolution ** 2 <= (radius + resolution / 2) ** 2
    return ndimage.binary_dilation(occ, structure=ball)


def _nearest_free_cell(occ, cell, max_reach=4):
    if not occ[tuple(cell)]:
        return cell
    best, best_d = None, np.inf
    for reach in range(1, max_reach + 1):
        ticks = range(-reach, reach + 1)
        for dx in ticks:
            for dy in ticks:
                for dz in ticks:
                    c = cell + np.array([dx, dy, dz])
                    if np.any(c < 0) or np.any(c >= occ.shape):
                        continue
                    if not occ[tuple(c)]:
                        d = dx * dx + dy * dy + dz * dz
                        if d < best_d:
                            best, best_d = c, d
        if best is not None:
            return best
    return None


def _line_free(occ, origin, resolution, a, b):
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / (resolution / 2))) + 1)
    pts = a[None, :] + np.linspace(0.0, 1.0, n)[:, None] * (b - a)[None, :]
    cells = np.floor((pts - origin) / resolution).astype(np.int64)
    cells = np.clip(cells, 0, np.array(occ.shape) - 1)
    return not np.any(occ[cells[:, 0], cells[:, 1], cells[:, 2]])


def _shortcut(occ, origin, resolution, waypoints):
    out = [waypoints[0]]
    i = 0
    while i < len(waypoints) - 1:
        j = len(waypoints) - 1
        while j > i + 1 and not _line_free(occ, origin, resolution, waypoints[i], waypoints[j]):
            j -= 1
        out.append(waypoints[j])
        i = j
    return np.asarray(out)


def global_plan(scenario: Scenario, grid_resolution: float = 0.25,
                speed: float | None = None,
                collision_model: CollisionModel | None = None,
                ground_level: float | None = 0.0) -> GlobalPlan:
    """Shortest 26-connected path on the r_q-inflated occupancy grid.

    The raw grid path is shortcut-smoothed (line-of-sight against the
    inflated grid) and resampled at 0.1 s spacing at the given speed. Cells
    below ground_level + r_q count as occupied (obstacles sit on a ground
    plane; pass None for free space). Returns a blocked plan when no path
    exists.
    """
    model = collision_model or CollisionModel()
    if speed is None:
        speed = scenario.nominal_speed() or 1.0
    start = scenario.start.position
    goal = scenario.goal
    pts = scenario.cloud.points
    anchors = [start, goal] + ([pts.min(axis=0), pts.max(axis=0)] if len(pts) else [])
    lo = np.min(anchors, axis=0) - np.array([1.0, 1.0, 0.5])
    hi = np.max(anchors, axis=0) + np.array([1.0, 1.0, 1.0])
    shape = np.maximum(np.ceil((hi - lo) / grid_resolution).astype(int) + 1, 1)

    occ = np.zeros(shape, dtype=bool)
    if len(pts):
        cells = np.floor((pts - lo) / grid_resolution).astype(np.int64)
        cells = np.clip(cells, 0, shape - 1)
        occ[cells[:, 0], cells[:, 1], cells[:, 2]] = True
        occ = _inflate(occ, grid_resolution, model.r_q)
    if ground_level is not None:
        z_centers = lo[2] + (np.arange(shape[2]) + 0.5) * grid_resolution
        occ[:, :, z_centers < ground_level + model.r_q] = True

    def to_cell(p):
        return np.clip(np.floor((p - lo) / grid_resolution).astype(np.int64), 0, shape - 1)

    start_cell = _nearest_free_cell(occ, to_cell(start))
    goal_cell = _nearest_free_cell(occ, to_cell(goal))
    if start_cell is None or goal_cell is None:
        return GlobalPlan(None, None, False, True)

    # A* over the flat grid
    strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
    occ_flat = occ.ravel()
    n_cells = occ_flat.size
    g = np.full(n_cells, np.inf, dtype=np.float64)
    parent = np.full(n_cells, -1, dtype=np.int64)
    s_idx = int(start_cell @ strides)
    t_idx = int(goal_cell @ strides)
    goal_arr = goal_cell.astype(float)

    def h(cell):
        # exact free-space 26-lattice distance (3D octile): tight heuristics
        # keep the open-space expansion close to the corridor
        d = np.sort(np.abs(cell - goal_arr))[::-1]
        return float(d[0] - d[1] + _SQRT2 * (d[1] - d[2]) + _SQRT3 * d[2]) * grid_resolution

    g[s_idx] = 0.0
    h0 = h(start_cell.astype(float))
    # ties on f break toward smaller h: drives expansion along the corridor
    # without sacrificing optimality
    heap = [(h0, h0, s_idx)]
    found = False
    while heap:
        f, _, idx = heapq.heappop(heap)
        if idx == t_idx:
            found = True
            break
        cx, rem = divmod(idx, int(strides[0]))
        cy, cz = divmod(rem, shape[2])
        cell = np.array([cx, cy, cz], dtype=np.int64)
        hc = h(cell.astype(float))
        if f > g[idx] + hc + 1e-9:
            continue
        nbrs = cell[None, :] + _NEIGHBORS
        ok = np.all((nbrs >= 0) & (nbrs < shape), axis=1)
        for k in np.nonzero(ok)[0]:
            nidx = int(nbrs[k] @ strides)
            if occ_flat[nidx]:
                continue
            ng = g[idx] + _NEIGHBOR_COST[k] * grid_resolution
            if ng < g[nidx] - 1e-12:
                g[nidx] = ng
                parent[nidx] = idx
                nh = h(nbrs[k].astype(float))
                heapq.heappush(heap, (ng + nh, nh, nidx))
    if not found:
        return GlobalPlan(None, None, False, True)

    cells = []
    idx = t_idx
    while idx != -1:
        cx, rem = divmod(idx, int(strides[0]))
        cy, cz = divmod(rem, shape[2])
        cells.append((cx, cy, cz))
        idx = int(parent[idx])
    cells.reverse()
    way = lo + (np.asarray(cells, dtype=float) + 0.5) * grid_resolution
    way = np.vstack([start[None, :], way, goal[None, :]])
    way = _shortcut(occ, lo, grid_resolution, way)

    seg_len = np.linalg.norm(np.diff(way, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    n = max(1, int(math.ceil(cum[-1] / (speed * 0.1))))
    s = np.minimum(np.arange(n + 1) * speed * 0.1, cum[-1])
    resampled = np.stack([np.interp(s, cum, way[:, k]) for k in range(3)], axis=1)
    traj = DiscreteTrajectory(np.arange(n + 1) * 0.1, resampled)
    return GlobalPlan(way, traj, True, False)


# --- labeling -----------------------------------------------------------------


def label(scenario: Scenario, cfg: ExpertConfig, use_global: bool = True,
          state: InitialState | None = None, speed: float | None = None,
          plan: GlobalPlan | None = None) -> ExpertLabel:
    """Label one planning instant: window the (global or raw) reference, sample.

    When use_global is set the conditioning path is a collision-free global
    plan; if planning is blocked the expert degrades to the raw reference.
    """
    state = state or scenario.start
    speed = speed or scenario.nominal_speed() or 1.0
    path_pts = scenario.reference.positions
    if use_global:
        if plan is None:
            plan = global_plan(scenario, speed=speed)
        if not plan.blocked:
            path_pts = plan.trajectory.positions
    window = path_window(path_pts, state.position, speed, cfg.horizon)
    _, lbl = mh_sample(window, scenario.cloud, state, cfg, return_chain=False)
    return lbl
