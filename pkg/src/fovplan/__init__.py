"""Perception-aware multimodal trajectory planning laboratory.

Pipeline: a multi-start optimization expert plans FOV-aware, collision-free
B-spline trajectories around a dynamic obstacle; a small feedforward student
is trained to imitate the expert's full set of local optima through a linear
sum assignment loss (with winner-takes-all baselines); closed-form yaw keeps
the obstacle in the camera cone; a replanning simulator exercises the whole
loop on moving obstacles.
"""

from ._kernels import backend_name
from .assignment import AssignmentMatrix, CostMatrices, cost_matrices, loss, lsa_assign, wta_assign
from .costs import (
    BoxPair,
    CostWeights,
    DynamicLimits,
    augmented_cost,
    c_dyn_lim,
    c_obj,
    collision_free,
    in_fov,
    safety_ratio,
)
from .dataset import Demonstration, load_checkpoint, load_demos_jsonl, save_checkpoint, save_demos_jsonl
from .expert import ExpertConfig, ExpertSolution, expert_plan, initial_guesses, optimize_single
from .frames import GRAVITY, Quaternion, UAVState, psi_from_b1, quat_mul, rotation_from_xi_psi
from .policy import Normalizer, Observation, Policy, train
from .splines import ActionTuple, Spline, SplineSpace, fit, impose_boundary_conditions, make_knots
from .yaw import PsiTrajectory, b1_closed_form, psi_profile

__version__ = "0.1.0"

__all__ = [
    "ActionTuple",
    "AssignmentMatrix",
    "BoxPair",
    "CostMatrices",
    "CostWeights",
    "Demonstration",
    "DynamicLimits",
    "ExpertConfig",
    "ExpertSolution",
    "GRAVITY",
    "Normalizer",
    "Observation",
    "Policy",
    "PsiTrajectory",
    "Quaternion",
    "Spline",
    "SplineSpace",
    "UAVState",
    "augmented_cost",
    "b1_closed_form",
    "backend_name",
    "c_dyn_lim",
    "c_obj",
    "collision_free",
    "cost_matrices",
    "expert_plan",
    "fit",
    "impose_boundary_conditions",
    "in_fov",
    "initial_guesses",
    "load_checkpoint",
    "load_demos_jsonl",
    "loss",
    "lsa_assign",
    "make_knots",
    "optimize_single",
    "psi_from_b1",
    "psi_profile",
    "quat_mul",
    "rotation_from_xi_psi",
    "safety_ratio",
    "save_checkpoint",
    "save_demos_jsonl",
    "train",
    "wta_assign",
]
