"""Expert-student matching: cost matrices, optimal assignment, WTA baselines, loss.

The n_e expert trajectories are matched to the n_s student trajectories with
the rectangular linear sum assignment solved by the Jonker-Volgenant
implementation in scipy; the (relaxed) winner-takes-all row/column schemes are
provided as baselines. Assignment always uses the position cost matrix; the
time cost matrix enters only the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

VARIANTS = ("LSA", "WTAr", "RWTAr", "WTAc", "RWTAc")


@dataclass(frozen=True)
class CostMatrices:
    """D_p[i, j]: MSE of normalized position control points between expert i and student j.

    D_T[i, j]: squared error of the normalized total times.
    """

    D_p: np.ndarray  # (n_e, n_s)
    D_T: np.ndarray  # (n_e, n_s)

    def __post_init__(self):
        if self.D_p.shape != self.D_T.shape:
            raise ValueError("D_p and D_T must have the same shape")
        n_e, n_s = self.D_p.shape
        if n_e > n_s:
            raise ValueError(f"need n_e <= n_s, got {n_e} > {n_s}")


@dataclass(frozen=True)
class AssignmentMatrix:
    A: np.ndarray  # (n_e, n_s), nonnegative
    variant: str
    eps: float = 0.0


def cost_matrices(expert_norm: np.ndarray, student_norm: np.ndarray) -> CostMatrices:
    """Cost matrices from normalized 13-scalar actions (rows: trajectories)."""
    expert_norm = np.atleast_2d(np.asarray(expert_norm, dtype=float))
    student_norm = np.atleast_2d(np.asarray(student_norm, dtype=float))
    if expert_norm.shape[0] == 0:
        raise ValueError("empty expert action list")
    ep, et = expert_norm[:, :12], expert_norm[:, 12]
    sp, st = student_norm[:, :12], student_norm[:, 12]
    diff = ep[:, None, :] - sp[None, :, :]
    D_p = np.mean(diff**2, axis=2)
    D_T = (et[:, None] - st[None, :]) ** 2
    return CostMatrices(D_p, D_T)


def _assignment_cost(D: np.ndarray, cols: np.ndarray) -> float:
    # exactly-rounded sum so cost comparisons are order-independent
    return math.fsum(D[i, int(c)] for i, c in enumerate(cols))


def _lsa_columns(D: np.ndarray) -> np.ndarray:
    rows, cols = linear_sum_assignment(D)
    out = np.empty(D.shape[0], dtype=int)
    out[rows] = cols
    return out


def _canonical_lsa_columns(D: np.ndarray) -> np.ndarray:
    """Lexicographically smallest (by row) column choice among optimal assignments."""
    n_e, n_s = D.shape
    best = _assignment_cost(D, _lsa_columns(D))
    chosen: list[int] = []
    fixed_cost = []
    remaining = list(range(n_s))
    for i in range(n_e):
        for j in remaining:
            sub = D[i + 1 :][:, [c for c in remaining if c != j]]
            tail = [] if sub.shape[0] == 0 else [sub[k, c] for k, c in enumerate(_lsa_columns(sub))]
            total = math.fsum(fixed_cost + [D[i, j]] + tail)
            if total == best:
                chosen.append(j)
                fixed_cost.append(D[i, j])
                remaining.remove(j)
                break
        else:  # pragma: no cover - optimal completion always exists
            raise RuntimeError("no optimal completion found; inconsistent LSA solve")
    return np.asarray(chosen, dtype=int)


def lsa_assign(cost: CostMatrices, canonical_ties: bool = True) -> AssignmentMatrix:
    """Binary assignment minimizing the total position cost.

    Every row ends up with exactly one 1; n_e columns sum to 1 and the other
    n_s - n_e columns to 0. With canonical_ties, exact-cost ties are resolved
    to the lexicographically smallest column sequence (extra sub-solves);
    without it, the scipy solution is returned directly (still optimal and
    deterministic, preferred in training loops where exact ties have measure
    zero).
    """
    D = cost.D_p
    cols = _canonical_lsa_columns(D) if canonical_ties else _lsa_columns(D)
    A = np.zeros_like(D)
    A[np.arange(D.shape[0]), cols] = 1.0
    return AssignmentMatrix(A, "LSA")


def wta_assign(cost: CostMatrices, variant: str, eps: float = 0.0) -> AssignmentMatrix:
    """(Relaxed) winner-takes-all assignment per row or per column of D_p.

    Row variants put (1 - eps) at each row's minimum and eps/(n_s - 1)
    elsewhere; column variants put (1 - eps) at each column's minimum and
    eps/(n_e - 1) elsewhere. With eps = 0 these are the binary WTA schemes.
    For the column variants with n_e = 1 the off-minimum weight is 0.
    """
    if variant not in ("WTAr", "RWTAr", "WTAc", "RWTAc"):
        raise ValueError(f"unknown WTA variant {variant!r}")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    if variant in ("WTAr", "WTAc") and eps != 0.0:
        raise ValueError(f"{variant} is the eps=0 case; use R{variant} for eps > 0")
    D = cost.D_p
    n_e, n_s = D.shape
    if variant in ("WTAr", "RWTAr"):
        off = eps / (n_s - 1) if n_s > 1 else 0.0
        A = np.full_like(D, off)
        A[np.arange(n_e), np.argmin(D, axis=1)] = 1.0 - eps
    else:
        off = eps / (n_e - 1) if n_e > 1 else 0.0
        A = np.full_like(D, off)
        A[np.argmin(D, axis=0), np.arange(n_s)] = 1.0 - eps
    return AssignmentMatrix(A, variant, eps)


def assign(cost: CostMatrices, variant: str, eps: float = 0.0, canonical_ties: bool = True) -> AssignmentMatrix:
    if variant == "LSA":
        return lsa_assign(cost, canonical_ties=canonical_ties)
    return wta_assign(cost, variant, eps)


def loss(A: AssignmentMatrix, cost: CostMatrices, beta_p: float = 1.0, beta_T: float = 1.0):
    """Total weighted assignment loss and its gradients w.r.t. the cost matrices.

    L = sum_ij A_ij (beta_p D_p,ij + beta_T D_T,ij); dL/dD_p = beta_p A and
    dL/dD_T = beta_T A.
    """
    if A.A.shape != cost.D_p.shape:
        raise ValueError("assignment and cost matrices disagree in shape")
    value = float(np.sum(A.A * (beta_p * cost.D_p + beta_T * cost.D_T)))
    return value, beta_p * A.A, beta_T * A.A
