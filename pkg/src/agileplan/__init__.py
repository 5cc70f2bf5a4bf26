"""Sampling-based quadrotor motion planning toolkit.

Modules:
  geometry     -- point clouds, clearance queries, truncated-quadratic collision cost
  trajectory   -- B-spline / discrete / quintic representations and projection
  environment  -- procedural Poisson forests, shape fields, gap walls
  expert       -- Metropolis-Hastings trajectory sampling and global planning
  multimodal   -- relaxed winner-takes-all losses and execution selection
  feasibility  -- latency-limited maximum-speed model
  bench        -- receding-horizon simulation harness
"""

__version__ = "0.1.0"

from .geometry import CollisionModel, PointCloud, collision_cost, in_collision
from .trajectory import (
    CubicBSpline,
    DiscreteTrajectory,
    InitialState,
    QuinticTrajectory,
    discretize,
    project_quintic,
    snap_cost,
    time_scale,
)
from .environment import (
    ForestSpec,
    GapWallSpec,
    Scenario,
    ShapeFieldSpec,
    gen_forest,
    gen_gap_wall,
    gen_pole,
    gen_shapes,
)
from .expert import ExpertConfig, ExpertLabel, global_plan, label, mh_chain, mh_sample, trajectory_cost
from .multimodal import (
    HypothesisSet,
    LabelSet,
    LossConfig,
    fit_hypotheses,
    rwta_loss,
    select_for_execution,
    total_loss,
)
from .feasibility import SensingParams, VehicleParams, max_speed, optimize_phi, rot_latency
from .bench import NoiseModel, RunConfig, RunReport, rollout, sweep

__all__ = [
    "CollisionModel", "PointCloud", "collision_cost", "in_collision",
    "CubicBSpline", "DiscreteTrajectory", "InitialState", "QuinticTrajectory",
    "discretize", "project_quintic", "snap_cost", "time_scale",
    "ForestSpec", "GapWallSpec", "Scenario", "ShapeFieldSpec",
    "gen_forest", "gen_gap_wall", "gen_pole", "gen_shapes",
    "ExpertConfig", "ExpertLabel", "global_plan", "label", "mh_chain", "mh_sample",
    "trajectory_cost",
    "HypothesisSet", "LabelSet", "LossConfig", "fit_hypotheses", "rwta_loss",
    "select_for_execution", "total_loss",
    "SensingParams", "VehicleParams", "max_speed", "optimize_phi", "rot_latency",
    "NoiseModel", "RunConfig", "RunReport", "rollout", "sweep",
]
