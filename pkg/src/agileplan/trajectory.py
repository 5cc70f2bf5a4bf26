"""Trajectory representations and the smooth-projection machinery.

Three representations cooperate here:

* ``CubicBSpline`` -- the planner's compact sample space: a clamped cubic
  curve pinned to the vehicle position (the anchor) plus three free control
  points. Clamping is what guarantees the curve starts exactly at the
  current state.
* ``DiscreteTrajectory`` -- time-stamped state samples at 0.1 s spacing.
  A 1 s horizon uses the canonical 10-sample layout t_i = i/10, i = 1..10.
* ``QuinticTrajectory`` -- per-axis order-5 polynomials obtained by
  least-squares projection of discrete samples under hard equality
  constraints on initial position, velocity and acceleration, solved
  through the KKT system. A scalar time-scale factor beta retargets the
  average speed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class TrajectoryError(ValueError):
    """Invalid trajectory input."""


class DegenerateTrajectoryError(TrajectoryError):
    """Trajectory has no net displacement; time scaling is undefined."""


class ProjectionError(TrajectoryError):
    """The constrained least-squares system could not be solved."""


DT = 0.1  # canonical sample spacing, seconds


def eq4_times(horizon: float = 1.0) -> np.ndarray:
    """Sample times i*0.1 for i = 1..horizon/0.1 (start excluded)."""
    n = int(round(horizon / DT))
    return np.arange(1, n + 1) * DT


@dataclass
class InitialState:
    """Vehicle state used to anchor planning: position, velocity, acceleration."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.acceleration = np.asarray(self.acceleration, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.position)):
            raise TrajectoryError("initial position must be finite")


class DiscreteTrajectory:
    """Ordered (t_i, position[, velocity, acceleration]) samples."""

    def __init__(self, times, positions, velocities=None, accelerations=None):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise TrajectoryError("times and positions length mismatch")
        if len(self.times) == 0:
            raise TrajectoryError("trajectory needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise TrajectoryError("sample times must be strictly increasing")
        self.velocities = None if velocities is None else np.asarray(velocities, dtype=float).reshape(-1, 3)
        self.accelerations = None if accelerations is None else np.asarray(accelerations, dtype=float).reshape(-1, 3)
        for arr, name in ((self.velocities, "velocities"), (self.accelerations, "accelerations")):
            if arr is not None and len(arr) != len(self.times):
                raise TrajectoryError(f"{name} length mismatch")

    def __len__(self):
        return len(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else DT

    def arc_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))

    def to_csv(self, path):
        cols = ["t", "x", "y", "z"]
        data = [self.times[:, None], self.positions]
        if self.velocities is not None:
            cols += ["vx", "vy", "vz"]
            data.append(self.velocities)
            if self.accelerations is not None:
                cols += ["ax", "ay", "az"]
                data.append(self.accelerations)
        table = np.hstack(data)
        with open(path, "w") as f:
            f.write(",".join(cols) + "\n")
            for row in table:
                f.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DiscreteTrajectory":
        with open(path) as f:
            header = f.readline().strip().split(",")
            rows = [[float(v) for v in line.strip().split(",")] for line in f if line.strip()]
        table = np.asarray(rows, dtype=float)
        if header[:4] != ["t", "x", "y", "z"]:
            raise TrajectoryError(f"unexpected CSV header {header}")
        vel = table[:, 4:7] if len(header) >= 7 else None
        acc = table[:, 7:10] if len(header) >= 10 else None
        return cls(table[:, 0], table[:, 1:4], vel, acc)


# --- clamped cubic B-spline -------------------------------------------------


def _ders_basis(knots, span, degree, t, n_ders):
    """Basis functions and derivatives at parameter t (NURBS-book A2.3).

    Returns an (n_ders+1, degree+1) array; row k holds the k-th derivative of
    the degree+1 basis functions that are non-zero on the span.
    """
    ndu = np.empty((degree + 1, degree + 1))
    ndu[0, 0] = 1.0
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    for j in range(1, degree + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n_ders + 1, degree + 1))
    ders[0, :] = ndu[:, degree]
    a = np.zeros((2, degree + 1))
    for r in range(degree + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk = r - k
            pk = degree - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else degree - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(degree)
    for k in range(1, n_ders + 1):
        ders[k, :] *= fac
        fac *= degree - k
    return ders


_BASIS_CACHE: dict = {}


def bspline_basis(times, duration: float = 1.0):
    """(B0, B1, B2) basis matrices mapping the 4 de Boor points of an anchored
    clamped cubic to position/velocity/acceleration at the given times.

    Cached: the sampler evaluates tens of thousands of curves on one grid.
    """
    t_arr = np.asarray(times, dtype=float)
    key = (float(duration), t_arr.tobytes())
    hit = _BASIS_CACHE.get(key)
    if hit is not None:
        return hit
    degree = 3
    knots = np.array([0.0] * 4 + [duration] * 4)
    b0 = np.empty((len(t_arr), 4))
    b1 = np.empty((len(t_arr), 4))
    b2 = np.empty((len(t_arr), 4))
    for i, t in enumerate(t_arr):
        if not (0.0 <= t <= duration):
            raise TrajectoryError(f"time {t} outside [0, {duration}]")
        ders = _ders_basis(knots, degree, degree, float(t), 2)
        b0[i], b1[i], b2[i] = ders
    for m in (b0, b1, b2):
        m.setflags(write=False)
    _BASIS_CACHE[key] = (b0, b1, b2)
    return b0, b1, b2


class CubicBSpline:
    """Clamped cubic curve: fixed start anchor plus three free control points.

    The anchor pins the curve start to the current vehicle position, so the
    sampled control points shape only the future. The curve is polynomial on
    (0, duration) and stays in the convex hull of {anchor, control points}.
    """

    def __init__(self, anchor, control_points, duration: float = 1.0):
        anchor = np.asarray(anchor, dtype=float).reshape(3)
        cps = np.asarray(control_points, dtype=float).reshape(3, 3)
        if duration <= 0:
            raise TrajectoryError("duration must be positive")
        self.anchor = anchor
        self.control_points = cps
        self.duration = float(duration)
        self._dboor = np.vstack([anchor[None, :], cps])

    def evaluate(self, t: float):
        """Position, velocity, acceleration at time t in [0, duration]."""
        if not (0.0 <= t <= self.duration):
            raise TrajectoryError(f"time {t} outside [0, {self.duration}]")
        b0, b1, b2 = bspline_basis(np.array([t]), self.duration)
        return b0[0] @ self._dboor, b1[0] @ self._dboor, b2[0] @ self._dboor

    def evaluate_many(self, times):
        b0, b1, b2 = bspline_basis(np.asarray(times, dtype=float), self.duration)
        return b0 @ self._dboor, b1 @ self._dboor, b2 @ self._dboor


def discretize(spline: CubicBSpline) -> DiscreteTrajectory:
    """Sample the spline on the canonical 0.1 s grid (start excluded)."""
    times = eq4_times(spline.duration)
    pos, vel, acc = spline.evaluate_many(times)
    return DiscreteTrajectory(times, pos, vel, acc)


# --- quintic projection -----------------------------------------------------


class QuinticTrajectory:
    """Per-axis order-5 polynomials with a scalar time-scale factor beta.

    ``coeffs[axis] = [a0..a5]`` parameterize the unit-duration polynomial
    mu(u) = sum a_j u^j. With beta != 1 the trajectory is evaluated at
    u = beta * t, i.e. traversed in 1/beta seconds of wall time.
    """

    def __init__(self, coeffs, beta: float = 1.0):
        coeffs = np.asarray(coeffs, dtype=float).reshape(3, 6)
        if not np.all(np.isfinite(coeffs)):
            raise TrajectoryError("quintic coefficients must be finite")
        if beta <= 0:
            raise TrajectoryError("beta must be positive")
        coeffs.setflags(write=False)
        self.coeffs = coeffs
        self.beta = float(beta)
        self._d1 = coeffs[:, 1:] * np.arange(1, 6)
        self._d2 = self._d1[:, 1:] * np.arange(1, 5)

    @property
    def duration(self) -> float:
        return 1.0 / self.beta

    def _powers(self, u, n):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return u[:, None] ** np.arange(n)

    def position(self, t):
        p = self._powers(self.beta * np.asarray(t, dtype=float), 6) @ self.coeffs.T
        return p[0] if np.isscalar(t) else p

    def velocity(self, t):
        v = self.beta * (self._powers(self.beta * np.asarray(t, dtype=float), 5) @ self._d1.T)
        return v[0] if np.isscalar(t) else v

    def acceleration(self, t):
        a = self.beta ** 2 * (self._powers(self.beta * np.asarray(t, dtype=float), 4) @ self._d2.T)
        return a[0] if np.isscalar(t) else a

    def state(self, t):
        return self.position(t), self.velocity(t), self.acceleration(t)

    def displacement(self) -> np.ndarray:
        """mu(1) - mu(0) of the unit-duration (unscaled) polynomial."""
        return self.coeffs[:, 1:].sum(axis=1)

    def to_json(self, path=None):
        obj = {"beta": self.beta, "axes": self.coeffs.tolist()}
        if path is None:
            return obj
        with open(path, "w") as f:
            json.dump(obj, f)

    @classmethod
    def from_json(cls, obj) -> "QuinticTrajectory":
        if isinstance(obj, (str, bytes)):
            with open(obj) as f:
                obj = json.load(f)
        return cls(obj["axes"], obj["beta"])


_PROJ_TIMES = eq4_times(1.0)
# design matrix of the fit: row i holds t_i^0 .. t_i^5
_PROJ_BASIS = _PROJ_TIMES[:, None] ** np.arange(6)
# equality constraints pin value, slope and curvature at t = 0
_PROJ_CONSTRAINTS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
    ]
)


def _kkt_matrix():
    b, a = _PROJ_BASIS, _PROJ_CONSTRAINTS
    kkt = np.zeros((9, 9))
    kkt[:6, :6] = 2.0 * b.T @ b
    kkt[:6, 6:] = a.T
    kkt[6:, :6] = a
    return kkt


_PROJ_KKT = _kkt_matrix()


def project_quintic_kkt(traj: DiscreteTrajectory, init: InitialState):
    """Constrained least-squares projection; returns (quintic, multipliers).

    Per axis, minimizes sum_i (p_i - a^T T(t_i))^2 subject to the polynomial
    matching init's position, velocity and acceleration at t = 0. Solved
    exactly through the stationarity (KKT) linear system; multipliers come
    back as a (3 axes, 3 constraints) array for optimality checks.
    """
    if len(traj) != len(_PROJ_TIMES) or not np.allclose(traj.times, _PROJ_TIMES, atol=1e-9):
        raise TrajectoryError("projection expects the 10-sample 0.1 s layout on (0, 1]")
    y = traj.positions  # (10, 3)
    rhs = np.zeros((9, 3))
    rhs[:6] = 2.0 * _PROJ_BASIS.T @ y
    rhs[6] = init.position
    rhs[7] = init.velocity
    rhs[8] = init.acceleration
    try:
        sol = np.linalg.solve(_PROJ_KKT, rhs)
    except np.linalg.LinAlgError as e:  # unreachable with the fixed basis; kept for contract
        raise ProjectionError(f"singular projection system: {e}") from e
    return QuinticTrajectory(sol[:6].T), sol[6:].T


def project_quintic(traj: DiscreteTrajectory, init: InitialState) -> QuinticTrajectory:
    return project_quintic_kkt(traj, init)[0]


def time_scale(q: QuinticTrajectory, v_des: float) -> QuinticTrajectory:
    """Retarget the average speed to v_des via beta = v_des / ||mu(1)-mu(0)||."""
    if v_des <= 0:
        raise TrajectoryError("desired speed must be positive")
    v_mu = float(np.linalg.norm(q.displacement()))
    if v_mu < 1e-12:
        raise DegenerateTrajectoryError("zero net displacement (hover); time scaling undefined")
    return QuinticTrajectory(q.coeffs, beta=v_des / v_mu)


def snap_cost(q: QuinticTrajectory) -> float:
    """Integral of squared 4th derivative over the unit domain, closed form.

    The 4th derivative of a quintic is 24*a4 + 120*a5*t, so the integral is
    576*a4^2 + 2880*a4*a5 + 4800*a5^2 per axis.
    """
    a4 = q.coeffs[:, 4]
    a5 = q.coeffs[:, 5]
    return float(np.sum(576.0 * a4 ** 2 + 2880.0 * a4 * a5 + 4800.0 * a5 ** 2))
