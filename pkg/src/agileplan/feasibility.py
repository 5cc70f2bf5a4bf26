"""Latency-limited maximum-speed model for lateral obstacle avoidance.

The avoidance maneuver is a pure roll to angle phi followed by full-thrust
lateral acceleration. Rolling costs t_rot = sqrt(2*phi*J/T_max) of extra
latency; the reachable speed bound is

    v_max = s / (t_s + t_p + t_rot(phi) + sqrt(2*r_obs / (sin(phi)*c_max)))

with sensing range s, sensing latency t_s and processing latency t_p. The
optimal roll angle is found by grid search and is independent of the
latencies, which only shift the denominator by a constant. The model ignores
lateral acceleration built up during the rotation phase.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class FeasibilityError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleParams:
    J: float = 0.007        # moment of inertia, kg m^2
    T_max: float = 1.02     # maximum torque, N m
    c_max: float = 35.3     # mass-normalized thrust, m/s^2
    r_obs: float = 0.95     # combined obstacle + vehicle radius, m

    def __post_init__(self):
        if min(self.J, self.T_max, self.c_max, self.r_obs) <= 0:
            raise FeasibilityError("vehicle parameters must be strictly positive")


@dataclass(frozen=True)
class SensingParams:
    s: float = 6.0          # sensing range, m
    t_s: float = 0.066      # sensing latency, s
    t_p: float = 0.0        # processing latency, s (per method)

    def __post_init__(self):
        if self.s < 0 or self.t_s < 0 or self.t_p < 0:
            raise FeasibilityError("sensing parameters must be non-negative")


def load_params(path):
    """Read {"J":..,"T_max":..,"c_max":..,"r_obs":..,"s":..,"t_s":..} overrides."""
    with open(path) as f:
        obj = json.load(f)
    veh = VehicleParams(**{k: obj[k] for k in ("J", "T_max", "c_max", "r_obs") if k in obj})
    sense_kw = {k: obj[k] for k in ("s", "t_s", "t_p") if k in obj}
    return veh, sense_kw


def rot_latency(v: VehicleParams, phi: float) -> float:
    """Time to roll to angle phi under maximum torque."""
    if not 0.0 < phi <= math.pi / 2:
        raise FeasibilityError(f"roll angle must be in (0, pi/2], got {phi}")
    return math.sqrt(2.0 * phi * v.J / v.T_max)


def max_speed(v: VehicleParams, sp: SensingParams, phi: float) -> float:
    """Largest forward speed that still permits lateral avoidance at roll phi."""
    t_rot = rot_latency(v, phi)
    t_lat = math.sqrt(2.0 * v.r_obs / (math.sin(phi) * v.c_max))
    return sp.s / (sp.t_s + sp.t_p + t_rot + t_lat)


def optimize_phi(v: VehicleParams, sp: SensingParams,
                 grid_step: float = math.radians(0.1)):
    """Grid-search the roll angle on (0, pi/2]; ties resolve to the smaller phi."""
    if grid_step <= 0:
        raise FeasibilityError("grid step must be positive")
    phis = np.arange(grid_step, math.pi / 2 + grid_step / 2, grid_step)
    phis = np.minimum(phis, math.pi / 2)
    t_rot = np.sqrt(2.0 * phis * v.J / v.T_max)
    t_lat = np.sqrt(2.0 * v.r_obs / (np.sin(phis) * v.c_max))
    speeds = sp.s / (sp.t_s + sp.t_p + t_rot + t_lat)
    best = int(np.argmax(speeds))  # first max = smallest phi on ties
    return float(phis[best]), float(speeds[best])


def speed_table_row(t_p: float, v: VehicleParams | None = None,
                    sense_kw: dict | None = None) -> dict:
    """One row of the per-method feasibility table for a processing latency."""
    v = v or VehicleParams()
    sp = SensingParams(t_p=t_p, **(sense_kw or {}))
    phi, vmax = optimize_phi(v, sp)
    return {
        "t_p_ms": t_p * 1000.0,
        "phi_deg": math.degrees(phi),
        "t_rot_ms": rot_latency(v, phi) * 1000.0,
        "v_max": vmax,
    }
