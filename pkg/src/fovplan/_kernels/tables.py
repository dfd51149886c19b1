"""Precomputed tables and the evaluation context for the planning-objective kernels.

Clamped uniform B-spline bases are scale-invariant in normalized time, so the
basis (and derivative-basis) matrices at fixed sample fractions are constant
across candidate total times T; only a T^-k factor per derivative order and a
final T factor on the quadrature weights vary. Both kernel backends consume
the same tables, which makes them agree with the reference spline/cost path
to float roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..costs import N_COLLISION_CHECK, N_QUAD, CostWeights, DynamicLimits, simpson_weights
from ..splines import (
    OBST_SPACE,
    POS_SPACE,
    Spline,
    SplineSpace,
    basis_matrix,
    derivative_cp_matrix,
    make_knots,
)
from ..yaw import DEFAULT_N_SAMPLES as N_PSI

N_CTRL = POS_SPACE.n_ctrl  # 9
N_SEG_OBST = OBST_SPACE.n_segments  # 7


@lru_cache(maxsize=1)
def unit_tables():
    """Basis/derivative matrices on the unit-time S^3_{3,12} spline family."""
    quad_fr = np.linspace(0.0, 1.0, N_QUAD)
    psi_fr = np.linspace(0.0, 1.0, N_PSI)
    coll_fr = np.linspace(0.0, 1.0, N_COLLISION_CHECK)

    knots3 = make_knots(POS_SPACE, 0.0, 1.0)
    d1 = derivative_cp_matrix(knots3, 3)  # (8, 9)
    d2 = derivative_cp_matrix(knots3[1:-1], 2)  # (7, 8)
    d3 = derivative_cp_matrix(knots3[2:-2], 1)  # (6, 7)

    space1 = SplineSpace(1, POS_SPACE.knot_m - 4, 1)

    def b(order, fr):
        if order == 0:
            return basis_matrix(POS_SPACE, 0.0, 1.0, fr)
        # second-derivative basis via the derivative control-point chain
        return basis_matrix(space1, 0.0, 1.0, fr) @ d2 @ d1

    # yaw spline least-squares solve matrix: (A^T A + 1e-12 I)^-1 A^T, matching fit()
    A = basis_matrix(POS_SPACE, 0.0, 1.0, psi_fr)
    psi_fit = np.linalg.solve(A.T @ A + 1e-12 * np.eye(N_CTRL), A.T)

    tables = {
        "wq": simpson_weights(N_QUAD),
        "b0_q": b(0, quad_fr),
        "b2_q": b(2, quad_fr),
        "b0_s": b(0, psi_fr),
        "b2_s": b(2, psi_fr),
        "b0_c": b(0, coll_fr),
        "d1": d1,
        "d2": d2,
        "d3": d3,
        "psi_fit": psi_fit,
    }
    return {k: np.ascontiguousarray(v) for k, v in tables.items()}


def obstacle_poly_coeffs(obst: Spline) -> np.ndarray:
    """Per-segment cubic power-basis coefficients (n_seg, 4, dim), exact.

    Within segment i, position(t) = c0 + c1 u + c2 u^2 + c3 u^3 with
    u = t - t_start - i * seg_dt.
    """
    n_seg = obst.space.n_segments
    seg_dt = obst.total_time / n_seg
    starts = obst.t_start + seg_dt * np.arange(n_seg)
    # evaluate value and derivatives just inside each segment start (right limit)
    coeffs = np.empty((n_seg, 4, obst.space.dim))
    coeffs[:, 0] = obst.eval(starts, 0)
    coeffs[:, 1] = obst.eval(starts, 1)
    coeffs[:, 2] = obst.eval(starts, 2) / 2.0
    coeffs[:, 3] = obst.eval(starts, 3) / 6.0
    return coeffs


@dataclass(frozen=True)
class EvalContext:
    """Everything the objective kernels need for one planning scenario (frame f)."""

    v_in: np.ndarray
    a_in: np.ndarray
    goal: np.ndarray
    obst_coeffs: np.ndarray  # (n_seg, 4, 3)
    obst_seg_dt: float
    t_pred: float
    rho: np.ndarray  # inflated box half extents
    alpha_j: float
    alpha_psi: float
    alpha_fov: float
    alpha_g: float
    alpha_T: float
    lam: float
    cos_half_theta: float
    gamma: float
    mu_coll: float
    v_max: np.ndarray
    a_max: np.ndarray
    j_max: np.ndarray
    psi_dot_max: float
    gravity: float


def make_context(
    v_in,
    a_in,
    goal,
    obst_spline: Spline,
    rho,
    w: CostWeights,
    lim: DynamicLimits,
    mu_coll: float,
    gravity: float,
) -> EvalContext:
    if abs(obst_spline.t_start) > 1e-12:
        raise ValueError("obstacle spline must start at t=0 (plan-relative time)")
    return EvalContext(
        v_in=np.ascontiguousarray(v_in, dtype=float),
        a_in=np.ascontiguousarray(a_in, dtype=float),
        goal=np.ascontiguousarray(goal, dtype=float),
        obst_coeffs=np.ascontiguousarray(obstacle_poly_coeffs(obst_spline)),
        obst_seg_dt=obst_spline.total_time / obst_spline.space.n_segments,
        t_pred=obst_spline.total_time,
        rho=np.ascontiguousarray(rho, dtype=float),
        alpha_j=w.alpha_j,
        alpha_psi=w.alpha_psi,
        alpha_fov=w.alpha_fov,
        alpha_g=w.alpha_g,
        alpha_T=w.alpha_T,
        lam=w.lam,
        cos_half_theta=float(np.cos(w.theta / 2.0)),
        gamma=w.gamma,
        mu_coll=mu_coll,
        v_max=np.ascontiguousarray(lim.v_max, dtype=float),
        a_max=np.ascontiguousarray(lim.a_max, dtype=float),
        j_max=np.ascontiguousarray(lim.j_max, dtype=float),
        psi_dot_max=lim.psi_dot_max,
        gravity=gravity,
    )


TERM_NAMES = ("jerk", "psi_dd", "fov", "goal", "time", "dyn_lim", "penetration")
