"""Objective-kernel backend selection: compiled extension with numpy fallback.

The compiled backend is used when the extension module built from
_speed.pyx is importable; set FOVPLAN_PURE=1 to force the numpy backend.
Both produce the same terms to float roundoff (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

import numpy as np

from ..yaw import SINGULAR_REL_TOL
from . import numpy_backend
from .tables import TERM_NAMES, EvalContext, make_context, unit_tables

_compiled = None
if os.environ.get("FOVPLAN_PURE", "0") != "1":
    try:
        from . import _speed as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "numpy"


def backend_name() -> str:
    return BACKEND


def _pack_scalars(ctx: EvalContext) -> np.ndarray:
    return np.array(
        [
            ctx.alpha_j,
            ctx.alpha_psi,
            ctx.alpha_fov,
            ctx.alpha_g,
            ctx.alpha_T,
            ctx.lam,
            ctx.cos_half_theta,
            ctx.gamma,
            ctx.mu_coll,
            ctx.gravity,
            ctx.obst_seg_dt,
            ctx.psi_dot_max,
            SINGULAR_REL_TOL,
        ]
    )


def _evaluate_terms_compiled(ctx: EvalContext, params: np.ndarray) -> np.ndarray:
    tab = unit_tables()
    params = np.ascontiguousarray(np.atleast_2d(params), dtype=float)
    out = np.empty((params.shape[0], len(TERM_NAMES)))
    _compiled.evaluate_terms(
        params,
        ctx.v_in,
        ctx.a_in,
        ctx.goal,
        ctx.obst_coeffs,
        _pack_scalars(ctx),
        ctx.rho,
        ctx.v_max,
        ctx.a_max,
        ctx.j_max,
        tab["b0_q"],
        tab["b2_q"],
        tab["b0_s"],
        tab["b2_s"],
        tab["b0_c"],
        tab["d1"],
        tab["d2"],
        tab["d3"],
        tab["psi_fit"],
        tab["wq"],
        out,
    )
    return out


def evaluate_terms(ctx: EvalContext, params: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Weighted objective terms (B, 7) for a batch of 13-scalar candidates."""
    use = backend or BACKEND
    if use == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel backend not available")
        return _evaluate_terms_compiled(ctx, params)
    return numpy_backend.evaluate_terms(ctx, params)


def evaluate_batch(ctx: EvalContext, params: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Full objective (sum of all weighted terms) per candidate."""
    return evaluate_terms(ctx, params, backend).sum(axis=1)


__all__ = [
    "BACKEND",
    "EvalContext",
    "TERM_NAMES",
    "backend_name",
    "evaluate_batch",
    "evaluate_terms",
    "make_context",
    "unit_tables",
]
