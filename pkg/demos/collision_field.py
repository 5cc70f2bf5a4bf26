"""Visualize the truncated-quadratic collision cost field around a pole.

The penalty is 4 at contact, decays quadratically, and vanishes two vehicle
radii from the nearest obstacle point. Writes collision_field.png next to
this script when matplotlib is available, otherwise prints a text slice.
"""

import os

import numpy as np

from agileplan.environment import gen_pole
from agileplan.geometry import CollisionModel, collision_cost_array

scenario = gen_pole(pole_distance=3.0, pole_diameter=1.5)
model = CollisionModel()

xs = np.linspace(0.5, 5.5, 220)
ys = np.linspace(-2.5, 2.5, 220)
gx, gy = np.meshgrid(xs, ys, indexing="ij")
queries = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, 1.5)], axis=1)
d = scenario.cloud.nearest_distances(queries)
field = collision_cost_array(model, d).reshape(gx.shape)

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.pcolormesh(gx, gy, field, shading="auto", cmap="inferno")
    fig.colorbar(im, label="collision cost")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("cost field at z = 1.5 m (pole at x = 3)")
    ax.set_aspect("equal")
    out = os.path.join(os.path.dirname(__file__), "collision_field.png")
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
except ImportError:
    # coarse text rendering: '#' costly, '.' free
    for row in field[::12, ::12].T[::-1]:
        print("".join("#" if v > 2 else ("+" if v > 0 else ".") for v in row))

print(f"max cost {field.max():.2f} (4.0 at contact), "
      f"zero beyond {2 * model.r_q:.1f} m clearance")
