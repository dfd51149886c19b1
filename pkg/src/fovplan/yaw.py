"""Closed-form camera-pointing yaw and the fitted yaw spline for a position trajectory.

Given the UAV position trajectory and the obstacle trajectory, the optical
axis b1 that maximizes the obstacle's presence in the FOV (subject to b1 unit
and perpendicular to the thrust direction xi) is the normalized projection of
the UAV-to-obstacle vector onto the plane orthogonal to xi. Sampling that
over time gives a yaw profile, which is least-squares fit into a cubic spline
sharing the position spline's knot structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import GRAVITY
from .splines import YAW_SPACE, Spline, fit, fit_residual_rms

DEFAULT_N_SAMPLES = 64

# r is treated as parallel to xi (singular: any perpendicular direction scores
# zero) when the projection norm falls below this, relative to ||r||.
SINGULAR_REL_TOL = 1e-9


@dataclass(frozen=True)
class PsiTrajectory:
    """Fitted yaw spline plus the unwrapped samples it came from."""

    spline: Spline
    sample_times: np.ndarray
    sample_psi: np.ndarray  # 2pi-unwrapped
    fit_residual: float


def b1_closed_form(r: np.ndarray, xi: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    """Unit optical-axis direction maximizing alignment with r subject to b1 . xi = 0.

    When r is (numerically) parallel to xi every perpendicular direction is
    equally good; the caller-supplied fallback (default e_x) is projected
    perpendicular to xi and used instead.
    """
    r = np.asarray(r, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xi_sq = float(xi @ xi)
    if xi_sq == 0.0:
        raise ValueError("xi must be nonzero")
    proj = r - (float(r @ xi) / xi_sq) * xi
    norm = np.linalg.norm(proj)
    if norm > SINGULAR_REL_TOL * (1.0 + np.linalg.norm(r)):
        return proj / norm
    if fallback is None:
        fallback = np.array([1.0, 0.0, 0.0])
    proj = fallback - (float(fallback @ xi) / xi_sq) * xi
    norm = np.linalg.norm(proj)
    if norm <= 1e-12:
        # fallback parallel to xi too: any perpendicular direction works
        helper = np.array([0.0, 1.0, 0.0]) if abs(xi[0]) > abs(xi[1]) else np.array([1.0, 0.0, 0.0])
        proj = np.cross(xi, helper)
        norm = np.linalg.norm(proj)
    return proj / norm


def _unit_xi_axes(xi: np.ndarray):
    """Zero-yaw body axes (b1_0, b2_0) for each row of xi, guarded near xi_z ~ -||xi||."""
    norms = np.linalg.norm(xi, axis=-1, keepdims=True)
    xb = xi / norms
    x, y, z = xb[..., 0], xb[..., 1], xb[..., 2]
    denom = np.maximum(1.0 + z, 1e-9)
    b1_0 = np.stack([1.0 - x * x / denom, -x * y / denom, -x], axis=-1)
    b2_0 = np.stack([-x * y / denom, 1.0 - y * y / denom, -y], axis=-1)
    return b1_0, b2_0


def psi_samples_from_arrays(pos: np.ndarray, acc: np.ndarray, obst: np.ndarray) -> np.ndarray:
    """Unwrapped yaw samples from aligned arrays of position, acceleration, obstacle position.

    This is the sampling core of psi_profile, shared with the fast kernels'
    reference implementation.
    """
    xi = acc + np.array([0.0, 0.0, GRAVITY])
    xi_sq = np.einsum("ij,ij->i", xi, xi)
    if np.any(xi_sq == 0.0):
        raise ValueError("xi vanished at a sample")
    r = obst - pos
    proj = r - ((np.einsum("ij,ij->i", r, xi) / xi_sq)[:, None]) * xi
    norms = np.linalg.norm(proj, axis=1)
    singular = norms <= SINGULAR_REL_TOL * (1.0 + np.linalg.norm(r, axis=1))
    b1 = np.zeros_like(proj)
    ok = ~singular
    b1[ok] = proj[ok] / norms[ok, None]
    if singular.any():
        for i in np.flatnonzero(singular):
            prev = b1[i - 1] if i > 0 else np.array([1.0, 0.0, 0.0])
            b1[i] = b1_closed_form(np.zeros(3), xi[i], fallback=prev)
    b1_0, b2_0 = _unit_xi_axes(xi)
    psi = np.arctan2(np.einsum("ij,ij->i", b1, b2_0), np.einsum("ij,ij->i", b1, b1_0))
    return np.unwrap(psi)


def psi_profile(pos: Spline, obst: Spline, n_samples: int = DEFAULT_N_SAMPLES) -> PsiTrajectory:
    """Closed-form yaw sampled along the trajectory, unwrapped, and spline-fit."""
    if n_samples < 13:
        raise ValueError(f"need at least 13 samples to fit the yaw spline, got {n_samples}")
    tol = 1e-9 * (1.0 + abs(pos.total_time))
    if pos.t_start < obst.t_start - tol or pos.t_end > obst.t_end + tol:
        raise ValueError("obstacle spline does not cover the position spline interval")
    ts = pos.t_start + pos.total_time * np.linspace(0.0, 1.0, n_samples)
    psi = psi_samples_from_arrays(pos.eval(ts, 0), pos.eval(ts, 2), obst.eval(ts, 0))
    samples = list(zip(ts, psi))
    spline = fit(YAW_SPACE, samples)
    return PsiTrajectory(spline, ts, psi, fit_residual_rms(spline, samples))
