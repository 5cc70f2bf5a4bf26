"""Constrained quintic projection and time scaling.

Ten noisy waypoints get projected onto per-axis order-5 polynomials under
hard constraints matching the vehicle's current position, velocity and
acceleration; the result is then time-scaled to a desired average speed.
"""

import os

import numpy as np

from agileplan.trajectory import (
    DiscreteTrajectory,
    InitialState,
    eq4_times,
    project_quintic,
    snap_cost,
    time_scale,
)

rng = np.random.default_rng(4)
t = eq4_times()
clean = np.stack([3.0 * t, 1.2 * np.sin(2.0 * t), 0.2 * t], axis=1)
noisy = clean + 0.05 * rng.standard_normal(clean.shape)

init = InitialState(np.zeros(3), velocity=[3.0, 2.4, 0.2], acceleration=[0.0, 0.0, 0.0])
quintic = project_quintic(DiscreteTrajectory(t, noisy), init)
scaled = time_scale(quintic, v_des=5.0)

residual = np.linalg.norm(quintic.position(t) - noisy, axis=1)
print(f"fit residual per sample: max {residual.max():.3f} m, mean {residual.mean():.3f} m")
print(f"start-state match: pos {np.abs(quintic.position(0.0) - init.position).max():.1e}, "
      f"vel {np.abs(quintic.velocity(0.0) - init.velocity).max():.1e}")
print(f"snap cost {snap_cost(quintic):.2f}; time-scale beta {scaled.beta:.3f} "
      f"(traversed in {scaled.duration:.2f} s at 5 m/s average)")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dense = np.linspace(0, 1, 300)
    pos = quintic.position(dense)
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    for ax, k, name in zip(axes, range(3), "xyz"):
        ax.plot(dense, pos[:, k], label="projected quintic")
        ax.plot(t, noisy[:, k], "o", ms=4, label="waypoints")
        ax.set_ylabel(f"{name} [m]")
    axes[0].legend()
    axes[-1].set_xlabel("t [s]")
    out = os.path.join(os.path.dirname(__file__), "trajectory_projection.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
except ImportError:
    pass
