"""Sample a distribution of collision-free trajectories around a pole.

Runs the Metropolis-Hastings chain on the 9-dimensional control-point space
and shows how the visited trajectories cover BOTH ways around the obstacle,
with the three best labels highlighted. This multi-modality is exactly what
a single-trajectory planner cannot represent.
"""

import os

import numpy as np

from agileplan.environment import gen_pole
from agileplan.expert import ExpertConfig, mh_sample, path_window
from agileplan.trajectory import bspline_basis, eq4_times

scenario = gen_pole(pole_distance=2.5)
window = path_window(scenario.reference.positions, scenario.start.position, speed=3.0)
cfg = ExpertConfig(seed=7)

chain, label = mh_sample(window, scenario.cloud, scenario.start, cfg)
print(f"chain acceptance rate: {label.acceptance_rate:.3f}")
print(f"label costs: {[round(c, 3) for c in label.costs]}")

sides = ["left" if t.positions[np.argmin(np.abs(t.positions[:, 0] - 2.5)), 1] > 0
         else "right" for t in label.trajectories]
print(f"label passes the pole on: {sides}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 6))
    pts = scenario.cloud.points
    ax.scatter(pts[::9, 0], pts[::9, 1], s=2, c="0.6", label="obstacle cloud")

    # a thinned sample of visited trajectories, rendered through the same
    # basis the sampler uses
    from agileplan.expert import heading_frame, spherical_to_cartesian

    b0, _, _ = bspline_basis(eq4_times(), 1.0)
    frame = heading_frame(window.positions[-1] - scenario.start.position)
    for sph in chain[2000::500]:
        cart = scenario.start.position + spherical_to_cartesian(sph) @ frame.T
        dboor = np.vstack([scenario.start.position, cart])
        pos = b0 @ dboor
        ax.plot(pos[:, 0], pos[:, 1], color="tab:blue", alpha=0.12, lw=1)

    for traj, side in zip(label.trajectories, sides):
        ax.plot(traj.positions[:, 0], traj.positions[:, 1], lw=2.5,
                label=f"label ({side})")
    ax.plot(window.positions[:, 0], window.positions[:, 1], "k--", label="reference window")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(loc="upper left")
    ax.set_title("sampled trajectory distribution and top-3 labels")
    out = os.path.join(os.path.dirname(__file__), "expert_sampling.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
except ImportError:
    pass
