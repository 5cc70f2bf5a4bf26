"""Mode preservation under the relaxed winner-takes-all loss.

Labels come in two clusters (dodge left / dodge right). Fitting three
hypotheses under R-WTA recovers both modes; a single least-squares
hypothesis lands on the label mean, squarely between the modes, which in a
real scene is exactly where the obstacle is.
"""

import os

import numpy as np

from agileplan.multimodal import LabelSet, LossConfig, fit_hypotheses
from agileplan.trajectory import eq4_times

rng = np.random.default_rng(0)
base = np.zeros((10, 3))
base[:, 0] = eq4_times() * 3.0  # forward at 3 m/s
dodge = np.zeros((10, 3))
dodge[:, 1] = np.linspace(0.1, 1.0, 10)  # lateral evasion ramp

labels = LabelSet(np.concatenate([
    base + dodge + 0.08 * rng.standard_normal((25, 10, 3)),
    base - dodge + 0.08 * rng.standard_normal((25, 10, 3)),
]))

cfg = LossConfig()
multi, trace = fit_hypotheses(labels, 3, cfg, steps=500, step_size=0.4 / len(labels), seed=1)
uni, _ = fit_hypotheses(labels, 1, cfg, steps=500, step_size=0.4 / len(labels), seed=1)

print(f"R-WTA loss: {trace[0]:.1f} -> {trace[-1]:.1f} over {len(trace)} steps")
print(f"multi-hypothesis endpoints (y): {[round(float(h[-1, 1]), 2) for h in multi.positions]}")
print(f"unimodal endpoint (y): {float(uni.positions[0][-1, 1]):.3f}  <- in the gap between modes")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    for l in labels.positions:
        ax.plot(l[:, 0], l[:, 1], color="0.8", lw=0.7)
    for k, h in enumerate(multi.positions):
        ax.plot(h[:, 0], h[:, 1], lw=2.5, label=f"hypothesis {k}")
    ax.plot(uni.positions[0][:, 0], uni.positions[0][:, 1], "k--", lw=2.5,
            label="unimodal fit (collapses)")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend()
    ax.set_title("two label modes: R-WTA keeps both, plain L2 averages them")
    out = os.path.join(os.path.dirname(__file__), "rwta_modes.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
except ImportError:
    pass
