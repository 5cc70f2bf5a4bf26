"""Relaxed winner-takes-all losses over trajectory hypotheses.

A hypothesis set is M candidate trajectories in the canonical 10-sample
layout plus a predicted collision cost per candidate. Each label trajectory
is softly assigned to its nearest hypothesis with weight 1-eps and to every
other hypothesis with eps/(M-1); the relaxation keeps the objective
differentiable enough for gradient descent while preserving distinct modes
(a plain L2 fit collapses all hypotheses onto the label mean).

Also implements the execution-time selection rule: among hypotheses whose
predicted cost is within 5% of the best, pick the one with the smallest
snap cost after projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CollisionModel, PointCloud, collision_cost_array
from .trajectory import (
    DiscreteTrajectory,
    InitialState,
    eq4_times,
    project_quintic,
    snap_cost,
)


class MultimodalError(ValueError):
    pass


class FitDivergedError(MultimodalError):
    """Gradient descent stopped improving and blew up; carries the loss trace."""

    def __init__(self, message, loss_trace):
        super().__init__(message)
        self.loss_trace = np.asarray(loss_trace)


@dataclass(frozen=True)
class LossConfig:
    epsilon: float = 0.05  # 1 - epsilon = 0.95 on the winning hypothesis
    lambda1: float = 10.0
    lambda2: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise MultimodalError("epsilon must lie in (0, 1)")


def _as_trajectories(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        arr = arr[None, ...]
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise MultimodalError(f"expected (n, samples, 3) trajectories, got {arr.shape}")
    return arr


class HypothesisSet:
    """M candidate trajectories (M, 10, 3) with predicted collision costs (M,)."""

    def __init__(self, positions, costs=None):
        self.positions = _as_trajectories(positions)
        m = len(self.positions)
        if m < 1:
            raise MultimodalError("need at least one hypothesis")
        self.costs = np.zeros(m) if costs is None else np.asarray(costs, dtype=float).reshape(m)

    def __len__(self):
        return len(self.positions)


class LabelSet:
    """Expert trajectories (position components) and optional true costs."""

    def __init__(self, positions, costs=None):
        self.positions = (np.empty((0, 10, 3)) if positions is None or len(positions) == 0
                          else _as_trajectories(positions))
        self.costs = None if costs is None else np.asarray(costs, dtype=float).reshape(len(self.positions))

    def __len__(self):
        return len(self.positions)


def assignment_weights(labels: LabelSet, hyps: HypothesisSet, cfg: LossConfig) -> np.ndarray:
    """(L, M) soft-assignment matrix: each row sums to 1.

    Row i puts 1-eps on the hypothesis nearest to label i and eps/(M-1) on
    the rest; degenerates to all-ones for M = 1. Nearest-ties go to the
    lower hypothesis index.
    """
    m = len(hyps)
    n = len(labels)
    if n == 0:
        return np.zeros((0, m))
    if m == 1:
        return np.ones((n, 1))
    diff = labels.positions[:, None] - hyps.positions[None]  # (L, M, 10, 3)
    d2 = np.einsum("lmij,lmij->lm", diff, diff)
    winners = np.argmin(d2, axis=1)
    alpha = np.full((n, m), cfg.epsilon / (m - 1))
    alpha[np.arange(n), winners] = 1.0 - cfg.epsilon
    return alpha


def rwta_loss(labels: LabelSet, hyps: HypothesisSet, cfg: LossConfig):
    """Relaxed WTA loss and its gradient w.r.t. hypothesis positions.

    loss = sum_i sum_k alpha_ik * ||label_i - hyp_k||^2. The gradient holds
    the assignment fixed (the relaxation exists precisely so that descent
    works); at assignment ties this is the lower-index subgradient.
    """
    m = len(hyps)
    if len(labels) == 0:
        return 0.0, np.zeros_like(hyps.positions)
    alpha = assignment_weights(labels, hyps, cfg)
    diff = labels.positions[:, None] - hyps.positions[None]  # (L, M, 10, 3)
    d2 = np.einsum("lmij,lmij->lm", diff, diff)
    loss = float(np.sum(alpha * d2))
    grad = -2.0 * np.einsum("lm,lmij->mij", alpha, diff)
    return loss, grad


def trajectory_collision_cost(cloud: PointCloud, positions,
                              model: CollisionModel | None = None) -> float:
    """Ground-truth collision cost of one trajectory: 0.1-weighted sum of the
    pointwise truncated-quadratic cost over its 10 samples."""
    model = model or CollisionModel()
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    d = cloud.clearances_capped(pos, 2.0 * model.r_q * 1.001)
    return float(0.1 * np.sum(collision_cost_array(model, d)))


@dataclass
class TotalLoss:
    value: float
    rwta: float
    cost_term: float
    cost_term_included: bool


def total_loss(labels: LabelSet, hyps: HypothesisSet, cfg: LossConfig,
               cloud: PointCloud | None = None,
               model: CollisionModel | None = None) -> TotalLoss:
    """Combined objective lambda1 * R-WTA + lambda2 * sum_k (c_k - C(tau_k))^2.

    Without a cloud the ground-truth costs are unavailable, so the cost term
    is skipped and flagged.
    """
    rwta, _ = rwta_loss(labels, hyps, cfg)
    if cloud is None:
        return TotalLoss(cfg.lambda1 * rwta, rwta, 0.0, False)
    true_costs = np.array(
        [trajectory_collision_cost(cloud, p, model) for p in hyps.positions]
    )
    cost_term = float(np.sum((hyps.costs - true_costs) ** 2))
    return TotalLoss(cfg.lambda1 * rwta + cfg.lambda2 * cost_term, rwta, cost_term, True)


def fit_hypotheses(labels: LabelSet, m: int, cfg: LossConfig, steps: int,
                   step_size: float, seed: int = 0, init=None, patience: int = 50):
    """Fit M hypothesis trajectories to labels by gradient descent on rwta_loss.

    Initialization perturbs randomly chosen labels. Returns (HypothesisSet,
    loss trace). Raises FitDivergedError when the loss has exceeded 1.5x its
    best value for `patience` consecutive steps.
    """
    if len(labels) < 1:
        raise MultimodalError("cannot fit to an empty label set")
    rng = np.random.default_rng(seed)
    if init is None:
        idx = rng.choice(len(labels), size=m, replace=len(labels) < m)
        scale = max(float(labels.positions.std()), 1e-3)
        hyp_pos = labels.positions[idx] + 0.01 * scale * rng.standard_normal((m,) + labels.positions.shape[1:])
    else:
        hyp_pos = np.array(init, dtype=float)
    trace = np.empty(steps)
    best = np.inf
    bad = 0
    for t in range(steps):
        loss, grad = rwta_loss(labels, HypothesisSet(hyp_pos), cfg)
        trace[t] = loss
        best = min(best, loss)
        bad = bad + 1 if loss > 1.5 * best + 1e-12 else 0
        if bad >= patience:
            raise FitDivergedError(
                f"loss diverged after {t + 1} steps (best {best:.3g}, now {loss:.3g})",
                trace[: t + 1],
            )
        hyp_pos = hyp_pos - step_size * grad
    return HypothesisSet(hyp_pos), trace


def select_for_execution(hyps: HypothesisSet, init: InitialState | None = None,
                         ratio: float = 0.95) -> int:
    """Pick the hypothesis to execute.

    Candidates are those with c*/c_k >= ratio (c* the minimum predicted
    cost); when the minimum is zero the candidates are exactly the zero-cost
    hypotheses, whose ratio is undefined. Among candidates the winner has
    the lowest snap cost after quintic projection; exact ties resolve to the
    lowest index.
    """
    init = init or InitialState(np.zeros(3))
    c = np.maximum(hyps.costs, 0.0)
    c_star = float(c.min())
    if c_star <= 0.0:
        candidates = np.nonzero(c <= 0.0)[0]
    else:
        candidates = np.nonzero(c_star / c >= ratio)[0]
    times = eq4_times(1.0)
    snaps = [
        snap_cost(project_quintic(DiscreteTrajectory(times, hyps.positions[k]), init))
        for k in candidates
    ]
    return int(candidates[int(np.argmin(snaps))])
