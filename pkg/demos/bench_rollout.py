"""Receding-horizon rollout through a random forest.

The planner replans every 0.1 s over a 1 s horizon: sample trajectories
around the global plan, select one by predicted cost and snap, project onto
a quintic, fly its first chunk, repeat. The blind follower executes the raw
reference and usually meets a tree.
"""

import os

import numpy as np

from agileplan.bench import RunConfig, rollout
from agileplan.environment import ForestSpec, gen_forest

scenario = gen_forest(ForestSpec(seed=3, clear_radius=1.5))
v_des = 5.0

expert = rollout(scenario, RunConfig(policy="expert", expert_samples=2500), v_des, seed=0)
blind = rollout(scenario, RunConfig(policy="blind"), v_des, seed=0)

print(f"expert: {expert.outcome} in {expert.flight_time:.1f} s, "
      f"mean speed {expert.mean_speed:.2f} m/s")
print(f"blind:  {blind.outcome} after {blind.flight_time:.1f} s")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(10, 5.5))
    pts = scenario.cloud.points
    ground = pts[np.abs(pts[:, 2] - 1.5) < 0.3]
    ax.scatter(ground[:, 0], ground[:, 1], s=1.5, c="0.65")
    ax.plot(scenario.reference.positions[:, 0], scenario.reference.positions[:, 1],
            "k--", lw=1, label="reference")
    ep = np.asarray(expert.path)
    bp = np.asarray(blind.path)
    ax.plot(ep[:, 0], ep[:, 1], "g-", lw=2, label=f"expert ({expert.outcome})")
    ax.plot(bp[:, 0], bp[:, 1], "r-", lw=2, label=f"blind ({blind.outcome})")
    circle = plt.Circle(scenario.goal[:2], scenario.goal_radius, color="g", alpha=0.12)
    ax.add_patch(circle)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="upper left")
    ax.set_title(f"forest rollout at {v_des:.0f} m/s (goal disk shaded)")
    out = os.path.join(os.path.dirname(__file__), "bench_rollout.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
except ImportError:
    pass
