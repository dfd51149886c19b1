"""Trajectory objective, FOV reward, dynamic-limit penalty, collision and safety metrics.

The objective combines jerk and yaw-acceleration smoothness integrals, a
smooth FOV-presence reward, a terminal goal term and a time term; integrals
use composite Simpson quadrature on 65 points. The ranking key for candidate
trajectories is the augmented cost: objective + lambda * dynamic-limit penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import GRAVITY
from .splines import Spline
from .yaw import PsiTrajectory, _unit_xi_axes

# 61 points = 60 subintervals: Simpson panels align with the 6 spline segments,
# so the piecewise-quadratic yaw-acceleration integrand is integrated exactly
N_QUAD = 61
N_COLLISION_CHECK = 100


@dataclass(frozen=True)
class CostWeights:
    alpha_j: float = 0.02
    alpha_psi: float = 0.05
    alpha_fov: float = 1.0
    alpha_g: float = 10.0
    alpha_T: float = 1.5
    lam: float = 20.0
    theta: float = np.pi / 2  # FOV cone opening angle
    gamma: float = 100.0  # sharpness of the smooth FOV indicator

    def __post_init__(self):
        for name in ("alpha_j", "alpha_psi", "alpha_fov", "alpha_g", "alpha_T", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 < self.theta < np.pi:
            raise ValueError("theta must be in (0, pi)")


@dataclass(frozen=True)
class DynamicLimits:
    v_max: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 3.0]))
    a_max: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 6.0]))
    j_max: np.ndarray = field(default_factory=lambda: np.array([30.0, 30.0, 30.0]))
    psi_dot_max: float = 4.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "j_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(arr > 0):
                raise ValueError(f"{name} must be strictly positive")
        if not self.psi_dot_max > 0:
            raise ValueError("psi_dot_max must be strictly positive")


@dataclass(frozen=True)
class BoxPair:
    """Axis-aligned bounding boxes (full side lengths) of obstacle and UAV."""

    s_obst: np.ndarray
    s_uav: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.25]))

    def __post_init__(self):
        for name in ("s_obst", "s_uav"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(arr > 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def rho(self) -> np.ndarray:
        """Half side lengths of the obstacle box inflated by the UAV box."""
        return (self.s_obst + self.s_uav) / 2.0


def simpson_weights(n_points: int) -> np.ndarray:
    """Composite Simpson weights on [0, 1]; n_points must be odd."""
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points >= 3")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * ((1.0 / (n_points - 1)) / 3.0)


def in_fov(p: np.ndarray, b1: np.ndarray, p_obst: np.ndarray, theta: float, gamma: float) -> float:
    """Smooth FOV membership in [0, 1]: logistic in b1 . r_hat - cos(theta/2)."""
    r = np.asarray(p_obst, dtype=float) - np.asarray(p, dtype=float)
    norm = np.linalg.norm(r)
    if norm <= 1e-12:
        raise ValueError("obstacle and camera positions coincide")
    z = gamma * (float(np.asarray(b1) @ r) / norm - np.cos(theta / 2.0))
    return float(1.0 / (1.0 + np.exp(-z)))


def _check_cover(pos: Spline, obst: Spline):
    tol = 1e-9 * (1.0 + abs(pos.total_time))
    if pos.t_start < obst.t_start - tol or pos.t_end > obst.t_end + tol:
        raise ValueError("mismatched intervals: obstacle spline does not cover the trajectory")


def _fov_values(pos: Spline, psi: PsiTrajectory, obst: Spline, ts: np.ndarray, w: CostWeights) -> np.ndarray:
    xi = pos.eval(ts, 2) + np.array([0.0, 0.0, GRAVITY])
    b1_0, b2_0 = _unit_xi_axes(xi)
    ang = psi.spline.eval(ts, 0)[:, 0]
    b1 = np.cos(ang)[:, None] * b1_0 + np.sin(ang)[:, None] * b2_0
    r = obst.eval(ts, 0) - pos.eval(ts, 0)
    norms = np.maximum(np.linalg.norm(r, axis=1), 1e-12)
    z = w.gamma * (np.einsum("ij,ij->i", b1, r) / norms - np.cos(w.theta / 2.0))
    return 1.0 / (1.0 + np.exp(-z))


def c_obj(pos: Spline, psi: PsiTrajectory, obst: Spline, goal: np.ndarray, w: CostWeights):
    """Objective value and its term breakdown (terms sum to the total).

    The jerk of a cubic spline is piecewise constant, so its squared-norm
    integral is the exact per-segment sum; the remaining integrals use
    composite Simpson quadrature on N_QUAD points.
    """
    _check_cover(pos, obst)
    T = pos.total_time
    ts = pos.t_start + T * np.linspace(0.0, 1.0, N_QUAD)
    wq = simpson_weights(N_QUAD) * T
    jerk_cps = pos.derivative().derivative().derivative().control_points
    int_jerk = float((T / pos.space.n_segments) * np.sum(jerk_cps**2))
    psi_dd = psi.spline.eval(ts, 2)[:, 0]
    int_psi = float(wq @ psi_dd**2)
    fov = _fov_values(pos, psi, obst, ts, w)
    int_fov = float(wq @ fov**3)
    goal_err = float(np.sum((pos.eval(pos.t_end, 0) - np.asarray(goal, dtype=float)) ** 2))
    terms = {
        "jerk": w.alpha_j * int_jerk,
        "psi_dd": w.alpha_psi * int_psi,
        "fov": -w.alpha_fov * int_fov,
        "goal": w.alpha_g * goal_err,
        "time": w.alpha_T * T,
    }
    return sum(terms.values()), terms


def _limit_violation_sq(cps: np.ndarray, limit) -> float:
    excess = np.maximum(0.0, np.abs(cps) - limit)
    return float(np.sum(excess**2))


def c_dyn_lim(pos: Spline, psi: PsiTrajectory, lim: DynamicLimits) -> float:
    """Soft dynamic-limit penalty on derivative control points.

    Zero iff every velocity/acceleration/jerk control point (and every yaw-rate
    control point) is within its limit; by the convex-hull property this is
    sufficient for the sampled trajectory to be feasible.
    """
    vel = pos.derivative()
    acc = vel.derivative()
    jerk = acc.derivative()
    total = _limit_violation_sq(vel.control_points, lim.v_max)
    total += _limit_violation_sq(acc.control_points, lim.a_max)
    total += _limit_violation_sq(jerk.control_points, lim.j_max)
    total += _limit_violation_sq(psi.spline.derivative().control_points, lim.psi_dot_max)
    return total


def augmented_cost(
    pos: Spline,
    psi: PsiTrajectory,
    obst: Spline,
    goal: np.ndarray,
    w: CostWeights,
    lim: DynamicLimits,
) -> float:
    total, _ = c_obj(pos, psi, obst, goal, w)
    return total + w.lam * c_dyn_lim(pos, psi, lim)


def collision_free(pos: Spline, obst: Spline, boxes: BoxPair, n_check: int = N_COLLISION_CHECK) -> bool:
    """True iff at every sampled time some axis separates the UAV from the inflated box."""
    _check_cover(pos, obst)
    ts = pos.t_start + pos.total_time * np.linspace(0.0, 1.0, n_check)
    diff = np.abs(pos.eval(ts, 0) - obst.eval(ts, 0))
    return bool(np.all(np.any(diff >= boxes.rho, axis=1)))


def collision_penetration(pos: Spline, obst: Spline, boxes: BoxPair, n_check: int = N_COLLISION_CHECK) -> float:
    """Sum over samples of squared penetration depth into the inflated box."""
    _check_cover(pos, obst)
    ts = pos.t_start + pos.total_time * np.linspace(0.0, 1.0, n_check)
    diff = np.abs(pos.eval(ts, 0) - obst.eval(ts, 0))
    depth = np.min(np.maximum(0.0, boxes.rho - diff), axis=1)
    return float(np.sum(depth**2))


def _positions_at(provider, ts: np.ndarray) -> np.ndarray:
    if isinstance(provider, Spline):
        return provider.eval(ts, 0)
    return np.asarray([provider(t) for t in ts], dtype=float)


def safety_ratio(executed, obstacles) -> float:
    """min over times, obstacles and axes of |p_j - p_obst,j| / rho_j.

    A ratio > 1 certifies no collision on the log, but the min over axes
    makes this very conservative: any instant where one axis coordinate
    matches the obstacle's (inevitable when flying past it) drives the ratio
    toward zero even at large clearance. See clearance_ratio for the exact
    box-separation certificate.
    """
    if len(executed) == 0:
        raise ValueError("empty execution log")
    ts = np.asarray([e[0] for e in executed], dtype=float)
    ps = np.asarray([e[1] for e in executed], dtype=float)
    ratio = np.inf
    for provider, boxes in obstacles:
        diff = np.abs(ps - _positions_at(provider, ts))
        ratio = min(ratio, float(np.min(diff / boxes.rho)))
    return ratio


def clearance_ratio(executed, obstacles) -> float:
    """min over times and obstacles of max over axes |p_j - p_obst,j| / rho_j.

    Exactly 1 at inflated-box contact: > 1 iff the log never enters any
    inflated obstacle box.
    """
    if len(executed) == 0:
        raise ValueError("empty execution log")
    ts = np.asarray([e[0] for e in executed], dtype=float)
    ps = np.asarray([e[1] for e in executed], dtype=float)
    ratio = np.inf
    for provider, boxes in obstacles:
        diff = np.abs(ps - _positions_at(provider, ts))
        ratio = min(ratio, float(np.min(np.max(diff / boxes.rho, axis=1))))
    return ratio


def breakdown_to_json(terms: dict) -> dict:
    """Cost breakdown as a JSON-ready record."""
    return {k: float(v) for k, v in terms.items()}
