"""Pure-numpy objective kernel: batched evaluation of the planning objective.

Mirrors the compiled backend exactly (same tables, same formulas); vectorizes
across the candidate batch and across sample times.
"""

from __future__ import annotations

import numpy as np

from ..yaw import SINGULAR_REL_TOL
from .tables import N_SEG_OBST, EvalContext, unit_tables


def _obstacle_at(ctx: EvalContext, ts: np.ndarray) -> np.ndarray:
    """Obstacle position at times ts (any shape); exact piecewise cubic evaluation."""
    seg = np.minimum((ts / ctx.obst_seg_dt).astype(int), N_SEG_OBST - 1)
    seg = np.maximum(seg, 0)
    u = ts - seg * ctx.obst_seg_dt
    c = ctx.obst_coeffs[seg]  # (..., 4, 3)
    u = u[..., None]
    return c[..., 0, :] + u * (c[..., 1, :] + u * (c[..., 2, :] + u * c[..., 3, :]))


def _control_points(ctx: EvalContext, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    B = params.shape[0]
    T = params[:, 12]
    delta = T / 6.0
    q = np.zeros((B, 9, 3))
    q[:, 1] = (delta / 3.0)[:, None] * ctx.v_in
    q[:, 2] = q[:, 1] + (2.0 * delta / 3.0)[:, None] * (
        ctx.v_in[None, :] + (delta / 2.0)[:, None] * ctx.a_in[None, :]
    )
    q[:, 3:7] = params[:, :12].reshape(B, 4, 3)
    q[:, 7] = q[:, 6]
    q[:, 8] = q[:, 6]
    return q, T


def _unit_axes(xi: np.ndarray):
    norms = np.linalg.norm(xi, axis=-1, keepdims=True)
    xb = xi / norms
    x, y, z = xb[..., 0], xb[..., 1], xb[..., 2]
    denom = np.maximum(1.0 + z, 1e-9)
    b1_0 = np.stack([1.0 - x * x / denom, -x * y / denom, -x], axis=-1)
    b2_0 = np.stack([-x * y / denom, 1.0 - y * y / denom, -y], axis=-1)
    return b1_0, b2_0


def _psi_control_points(ctx: EvalContext, tab, q: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Fitted yaw-spline control points per candidate, (9, B)."""
    pos = np.einsum("sn,bnd->sbd", tab["b0_s"], q)
    acc = np.einsum("sn,bnd->sbd", tab["b2_s"], q) / (T**2)[None, :, None]
    ts = np.linspace(0.0, 1.0, pos.shape[0])[:, None] * T[None, :]
    obst = _obstacle_at(ctx, ts)
    xi = acc + np.array([0.0, 0.0, ctx.gravity])
    r = obst - pos
    xi_sq = np.einsum("sbd,sbd->sb", xi, xi)
    proj = r - (np.einsum("sbd,sbd->sb", r, xi) / xi_sq)[..., None] * xi
    norms = np.linalg.norm(proj, axis=-1)
    singular = norms <= SINGULAR_REL_TOL * (1.0 + np.linalg.norm(r, axis=-1))
    safe = np.where(singular, 1.0, norms)
    b1 = proj / safe[..., None]
    if singular.any():
        e_x = np.array([1.0, 0.0, 0.0])
        for s, b in zip(*np.nonzero(singular)):
            prev = b1[s - 1, b] if s > 0 else e_x
            fb = prev - (float(prev @ xi[s, b]) / xi_sq[s, b]) * xi[s, b]
            n = np.linalg.norm(fb)
            if n <= 1e-12:
                helper = (
                    np.array([0.0, 1.0, 0.0])
                    if abs(xi[s, b, 0]) > abs(xi[s, b, 1])
                    else np.array([1.0, 0.0, 0.0])
                )
                fb = np.cross(xi[s, b], helper)
                n = np.linalg.norm(fb)
            b1[s, b] = fb / n
    b1_0, b2_0 = _unit_axes(xi)
    psi = np.arctan2(np.einsum("sbd,sbd->sb", b1, b2_0), np.einsum("sbd,sbd->sb", b1, b1_0))
    psi = np.unwrap(psi, axis=0)
    return tab["psi_fit"] @ psi


def evaluate_terms(ctx: EvalContext, params: np.ndarray) -> np.ndarray:
    """Weighted objective terms per candidate, (B, 7); rows sum to the full objective."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    tab = unit_tables()
    q, T = _control_points(ctx, params)
    B = params.shape[0]
    wq = tab["wq"][:, None] * T[None, :]  # Simpson weights scaled to [0, T]

    psi_cps = _psi_control_points(ctx, tab, q, T)  # (9, B)

    # quadrature samples
    pos_q = np.einsum("qn,bnd->qbd", tab["b0_q"], q)
    acc_q = np.einsum("qn,bnd->qbd", tab["b2_q"], q) / (T**2)[None, :, None]
    ts_q = np.linspace(0.0, 1.0, pos_q.shape[0])[:, None] * T[None, :]
    obst_q = _obstacle_at(ctx, ts_q)

    psi_dd = (tab["b2_q"] @ psi_cps) / (T**2)[None, :]
    int_psi = np.sum(wq * psi_dd**2, axis=0)

    xi_q = acc_q + np.array([0.0, 0.0, ctx.gravity])
    b1_0, b2_0 = _unit_axes(xi_q)
    ang = tab["b0_q"] @ psi_cps
    b1 = np.cos(ang)[..., None] * b1_0 + np.sin(ang)[..., None] * b2_0
    r = obst_q - pos_q
    rn = np.maximum(np.linalg.norm(r, axis=-1), 1e-12)
    z = ctx.gamma * (np.einsum("qbd,qbd->qb", b1, r) / rn - ctx.cos_half_theta)
    fov = 1.0 / (1.0 + np.exp(-z))
    int_fov = np.sum(wq * fov**3, axis=0)

    goal_err = np.sum((q[:, 8, :] - ctx.goal) ** 2, axis=1)

    # derivative control points: exact jerk integral and dynamic-limit penalty
    vel = np.einsum("vn,bnd->bvd", tab["d1"], q) / T[:, None, None]
    acc = np.einsum("av,bvd->bad", tab["d2"], vel) / T[:, None, None]
    jerk = np.einsum("ja,bad->bjd", tab["d3"], acc) / T[:, None, None]
    int_jerk = (T / jerk.shape[1]) * np.sum(jerk**2, axis=(1, 2))
    dyn = np.sum(np.maximum(0.0, np.abs(vel) - ctx.v_max) ** 2, axis=(1, 2))
    dyn += np.sum(np.maximum(0.0, np.abs(acc) - ctx.a_max) ** 2, axis=(1, 2))
    dyn += np.sum(np.maximum(0.0, np.abs(jerk) - ctx.j_max) ** 2, axis=(1, 2))
    psi_dot = (tab["d1"] @ psi_cps) / T[None, :]
    dyn += np.sum(np.maximum(0.0, np.abs(psi_dot) - ctx.psi_dot_max) ** 2, axis=0)

    # collision penetration into the inflated box
    pos_c = np.einsum("cn,bnd->cbd", tab["b0_c"], q)
    ts_c = np.linspace(0.0, 1.0, pos_c.shape[0])[:, None] * T[None, :]
    diff = np.abs(pos_c - _obstacle_at(ctx, ts_c))
    depth = np.min(np.maximum(0.0, ctx.rho - diff), axis=-1)
    pen = np.sum(depth**2, axis=0)

    terms = np.empty((B, 7))
    terms[:, 0] = ctx.alpha_j * int_jerk
    terms[:, 1] = ctx.alpha_psi * int_psi
    terms[:, 2] = -ctx.alpha_fov * int_fov
    terms[:, 3] = ctx.alpha_g * goal_err
    terms[:, 4] = ctx.alpha_T * T
    terms[:, 5] = ctx.lam * dyn
    terms[:, 6] = ctx.mu_coll * pen
    return terms
