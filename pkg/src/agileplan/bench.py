"""Receding-horizon simulation harness.

Rolls a policy through a scenario: plan over a 1 s horizon, execute the
first replan_period seconds of the selected quintic, repeat. Tracking is
idealized (the vehicle follows the commanded polynomial exactly between
replans), which isolates planning quality from control error. Optional
state noise perturbs what the planner sees; collisions are always checked
against the true state. Desk-scale success rates are trend-level only.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import ForestSpec, GapWallSpec, ShapeFieldSpec, Scenario, gen_forest, gen_gap_wall, gen_pole, gen_shapes
from .expert import ExpertConfig, GlobalPlan, global_plan, label
from .multimodal import HypothesisSet, select_for_execution, trajectory_collision_cost
from .trajectory import (
    DegenerateTrajectoryError,
    DiscreteTrajectory,
    InitialState,
    QuinticTrajectory,
    project_quintic,
    time_scale,
)


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """State-estimate and actuation disturbances.

    Velocity noise and the attitude residual (a small rotation applied to the
    perceived velocity/acceleration) corrupt the state the planner sees; the
    thrust multiplier, drawn once per rollout, scales the acceleration the
    vehicle actually realizes at each handoff.
    """

    velocity_mean: tuple = (0.0, 0.0, 0.0)
    velocity_std: tuple = (0.0, 0.0, 0.0)
    attitude_quat_mean: tuple = (1.0, 0.0, 0.0, 0.0)  # (w, x, y, z) residual
    attitude_quat_std: tuple = (0.0, 0.0, 0.0, 0.0)
    thrust_low: float = 1.0
    thrust_high: float = 1.0

    @classmethod
    def flight_identified(cls) -> "NoiseModel":
        """Disturbance magnitudes identified from instrumented fast flights."""
        return cls(
            velocity_mean=(0.009, -0.198, -0.570),
            velocity_std=(0.496, 0.210, 1.243),
            attitude_quat_mean=(0.997, 0.002, 0.022, 0.003),
            attitude_quat_std=(0.000, 0.003, 0.001, 0.001),
            thrust_low=0.9,
            thrust_high=1.0,
        )

    def perceived_state(self, state: InitialState, rng) -> InitialState:
        dv = np.asarray(self.velocity_mean) + np.asarray(self.velocity_std) * rng.standard_normal(3)
        quat = np.asarray(self.attitude_quat_mean) + np.asarray(self.attitude_quat_std) * rng.standard_normal(4)
        rot = _quat_to_matrix(quat)
        return InitialState(state.position, rot @ (state.velocity + dv), rot @ state.acceleration)

    def thrust_factor(self, rng) -> float:
        if self.thrust_high <= self.thrust_low:
            return self.thrust_low
        return float(rng.uniform(self.thrust_low, self.thrust_high))


def _quat_to_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class RunConfig:
    replan_period: float = 0.1
    speeds: tuple = (3.0, 5.0, 7.0, 10.0)
    n_seeds: int = 10
    noise: NoiseModel | None = None
    policy: str = "expert"  # expert | expert_local | blind
    expert_samples: int = 2500  # sampler budget per replan
    expert_config: ExpertConfig = field(default_factory=ExpertConfig)
    grid_resolution: float = 0.25
    time_budget_factor: float = 3.0

    def __post_init__(self):
        if self.policy not in ("expert", "expert_local", "blind"):
            raise BenchError(f"unknown policy {self.policy!r}")
        ratio = self.replan_period / 0.1
        if abs(ratio - round(ratio)) > 1e-9 or self.replan_period <= 0:
            raise BenchError("replan period must be a positive multiple of 0.1 s")
        if any(v <= 0 for v in self.speeds):
            raise BenchError("speeds must be positive")


@dataclass
class RunResult:
    outcome: str  # success | collision | timeout | infeasible
    flight_time: float
    path: np.ndarray
    mean_speed: float
    cause: str = ""


def _finish(outcome, t, path, cause=""):
    path = np.asarray(path)
    length = float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1))) if len(path) > 1 else 0.0
    mean_speed = length / t if t > 0 else 0.0
    return RunResult(outcome, t, path, mean_speed, cause)


COLLISION_CHECK_SPACING = 0.05  # meters; keeps detection independent of flight speed

# execution guards: the time-scale factor is a speed regularizer, not a
# catapult -- a degenerate fit (near-zero net displacement) would otherwise
# send the evaluation far outside the fitted domain. The acceleration handoff
# saturates at the platform's mass-normalized thrust.
BETA_LIMITS = (0.5, 2.0)
ACCEL_LIMIT = 35.3  # m/s^2


def _collides(cloud, model, samples) -> bool:
    d = cloud.clearances_capped(np.asarray(samples).reshape(-1, 3), model.r_q * 1.01)
    return bool(np.any(d < model.r_q))


def _rollout_blind(scenario: Scenario, cfg: RunConfig, v_des: float) -> RunResult:
    model = cfg.expert_config.collision_model
    pts = scenario.reference.positions
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    budget = cfg.time_budget_factor * cum[-1] / v_des
    path = [pts[0].copy()]
    t, s = 0.0, 0.0
    if np.linalg.norm(pts[0] - scenario.goal) <= scenario.goal_radius:
        return _finish("success", t, path)
    while t < budget:
        t += 0.1
        s_next = min(s + v_des * 0.1, cum[-1])
        n_fine = max(1, int(math.ceil((s_next - s) / COLLISION_CHECK_SPACING)))
        s_fine = s + (np.arange(1, n_fine + 1) / n_fine) * (s_next - s)
        fine = np.stack([np.interp(s_fine, cum, pts[:, k]) for k in range(3)], axis=1)
        s = s_next
        p = fine[-1]
        path.append(p)
        if _collides(scenario.cloud, model, fine):
            return _finish("collision", t, path)
        if np.linalg.norm(p - scenario.goal) <= scenario.goal_radius:
            return _finish("success", t, path)
    return _finish("timeout", t, path)


def rollout(scenario: Scenario, cfg: RunConfig, v_des: float, seed: int) -> RunResult:
    """One run; deterministic in (scenario, cfg, v_des, seed)."""
    if cfg.policy == "blind":
        return _rollout_blind(scenario, cfg, v_des)

    rng = np.random.default_rng(seed)
    model = cfg.expert_config.collision_model
    base_cfg = cfg.expert_config.scaled(cfg.expert_samples)
    use_global = cfg.policy == "expert"
    plan: GlobalPlan | None = None
    if use_global:
        plan = global_plan(scenario, cfg.grid_resolution, speed=v_des, collision_model=model)

    nominal = scenario.reference.arc_length() / v_des
    budget = cfg.time_budget_factor * nominal
    thrust_m = cfg.noise.thrust_factor(rng) if cfg.noise else 1.0
    n_sub = int(round(cfg.replan_period / 0.1))

    state = scenario.start
    path = [state.position.copy()]
    t = 0.0
    if np.linalg.norm(state.position - scenario.goal) <= scenario.goal_radius:
        return _finish("success", t, path)
    while t < budget:
        seen = cfg.noise.perceived_state(state, rng) if cfg.noise else state
        step_cfg = replace(base_cfg, seed=int(rng.integers(2 ** 62)))
        lbl = label(scenario, step_cfg, use_global=use_global, state=seen,
                    speed=v_des, plan=plan)
        if not lbl.feasible:
            return _finish("infeasible", t, path, cause="no collision-free sample")
        rel = np.stack([traj.positions - state.position for traj in lbl.trajectories])
        costs = np.array(
            [trajectory_collision_cost(scenario.cloud, traj.positions, model)
             for traj in lbl.trajectories]
        )
        hyps = HypothesisSet(rel, costs)
        init = InitialState(np.zeros(3), seen.velocity, seen.acceleration)
        k = select_for_execution(hyps, init)
        quintic = project_quintic(DiscreteTrajectory(lbl.trajectories[k].times, rel[k]), init)
        try:
            beta = time_scale(quintic, v_des).beta
        except DegenerateTrajectoryError:
            beta = 1.0  # hover-ish segment: execute unscaled
        beta = min(max(beta, BETA_LIMITS[0]), BETA_LIMITS[1])
        quintic = QuinticTrajectory(quintic.coeffs, beta=beta)
        base_pos = state.position
        for j in range(1, n_sub + 1):
            ts = j * 0.1
            p = base_pos + quintic.position(ts)
            # sample the executed curve finely enough that detection does not
            # depend on flight speed
            step_len = float(np.linalg.norm(quintic.position(ts) - quintic.position(ts - 0.1)))
            n_fine = max(1, int(math.ceil(step_len / COLLISION_CHECK_SPACING)))
            t_fine = ts - 0.1 + (np.arange(1, n_fine + 1) / n_fine) * 0.1
            fine = base_pos + quintic.position(t_fine)
            path.append(p)
            if _collides(scenario.cloud, model, fine):
                return _finish("collision", t + ts, path)
            if np.linalg.norm(p - scenario.goal) <= scenario.goal_radius:
                return _finish("success", t + ts, path)
        t += cfg.replan_period
        t_end = n_sub * 0.1
        acc = thrust_m * quintic.acceleration(t_end)
        acc_norm = np.linalg.norm(acc)
        if acc_norm > ACCEL_LIMIT:
            acc *= ACCEL_LIMIT / acc_norm
        state = InitialState(base_pos + quintic.position(t_end), quintic.velocity(t_end), acc)
    return _finish("timeout", t, path)


# --- sweeps -------------------------------------------------------------------


def _build_scenario(kind: str, intensity: float, seed: int, gap_mode: str = "test") -> Scenario:
    if kind == "forest":
        return gen_forest(ForestSpec(intensity=intensity, seed=seed, clear_radius=1.5))
    if kind == "shapes":
        return gen_shapes(ShapeFieldSpec(intensity=intensity, seed=seed, clear_radius=1.5))
    if kind == "gap":
        return gen_gap_wall(GapWallSpec.draw(seed, mode=gap_mode))
    if kind == "pole":
        return gen_pole()
    raise BenchError(f"unknown environment kind {kind!r}")


def _run_cell(args):
    kind, intensity, gap_mode, scenario_seed, speed, run_seed, cfg = args
    scenario = _build_scenario(kind, intensity, scenario_seed, gap_mode)
    result = rollout(scenario, cfg, speed, run_seed)
    return {
        "speed": speed,
        "seed": scenario_seed,
        "outcome": result.outcome,
        "flight_time": round(result.flight_time, 9),
    }


@dataclass
class RunReport:
    cells: list
    aggregate: list

    def to_json(self, path=None):
        obj = {"cells": self.cells, "aggregate": self.aggregate}
        if path is None:
            return obj
        with open(path, "w") as f:
            json.dump(obj, f, indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["speed", "seed", "outcome", "flight_time"])
            w.writeheader()
            w.writerows(self.cells)

    def success_rate(self, speed: float) -> float:
        for row in self.aggregate:
            if row["speed"] == speed:
                return row["success_rate"]
        raise KeyError(speed)


def sweep(env_kind: str, cfg: RunConfig, intensity: float = 1.0 / 25.0,
          master_seed: int = 0, gap_mode: str = "test", threads: int = 1) -> RunReport:
    """Cartesian product over speeds x seed realizations; deterministic per master seed."""
    tasks = []
    for i in range(cfg.n_seeds):
        for si, speed in enumerate(cfg.speeds):
            run_seed = int(np.random.SeedSequence([master_seed, i, si]).generate_state(1)[0])
            tasks.append((env_kind, intensity, gap_mode, master_seed + i, float(speed), run_seed, cfg))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    cells.sort(key=lambda c: (c["speed"], c["seed"]))
    aggregate = []
    for speed in cfg.speeds:
        rows = [c for c in cells if c["speed"] == speed]
        n_success = sum(1 for c in rows if c["outcome"] == "success")
        aggregate.append({"speed": float(speed), "success_rate": n_success / len(rows)})
    return RunReport(cells, aggregate)
