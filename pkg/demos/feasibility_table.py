"""Reproduce the latency-limited maximum-speed table.

For each method's processing latency, grid-search the roll angle that
maximizes the avoidable forward speed. The optimal angle is the same for
every latency; only the speed bound moves.
"""

from agileplan.feasibility import speed_table_row

METHODS = [
    ("mapping+planning pipeline", 0.0652),
    ("reactive primitive planner", 0.0191),
    ("learned depth policy", 0.0103),
]

print(f"{'method':<28} {'t_p [ms]':>9} {'phi* [deg]':>11} {'t_rot [ms]':>11} {'v_max [m/s]':>12}")
for name, t_p in METHODS:
    row = speed_table_row(t_p)
    print(f"{name:<28} {row['t_p_ms']:>9.1f} {row['phi_deg']:>11.1f} "
          f"{row['t_rot_ms']:>11.1f} {row['v_max']:>12.2f}")
