"""Clamped uniform B-splines: evaluation, differentiation, fitting, boundary conditions.

All trajectories in this package (UAV position, yaw angle, obstacle prediction)
are carried by clamped uniform B-splines. A spline of degree p with m+1 knots
has n+1 = m-p control points and m-2p polynomial segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Spaces used throughout: S^3_{3,12} for the UAV position (9 control points,
# 6 segments), S^3_{3,13} for the obstacle prediction (10 control points),
# S^1_{3,12} for yaw (9 scalar control points).
UAV_DEGREE = 3
UAV_KNOT_M = 12
OBST_KNOT_M = 13


@dataclass(frozen=True)
class SplineSpace:
    """A family of clamped uniform splines: degree p, m+1 knots, dimension d."""

    degree: int
    knot_m: int  # knots are indexed 0..m, i.e. m+1 of them
    dim: int

    def __post_init__(self):
        # degree 0 is admitted so the derivative chain of a cubic closes
        # (its jerk is piecewise constant)
        if self.degree < 0:
            raise ValueError(f"degree must be >= 0, got {self.degree}")
        if self.knot_m < 2 * self.degree + 1:
            raise ValueError(
                f"need m >= 2p+1 for at least one segment (p={self.degree}, m={self.knot_m})"
            )
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")

    @property
    def n_ctrl(self) -> int:
        """Number of control points, n+1 = m-p."""
        return self.knot_m - self.degree

    @property
    def n_segments(self) -> int:
        return self.knot_m - 2 * self.degree


POS_SPACE = SplineSpace(UAV_DEGREE, UAV_KNOT_M, 3)  # 9 control points
OBST_SPACE = SplineSpace(UAV_DEGREE, OBST_KNOT_M, 3)  # 10 control points
YAW_SPACE = SplineSpace(UAV_DEGREE, UAV_KNOT_M, 1)  # 9 scalar control points


def make_knots(space: SplineSpace, t_start: float, total_time: float) -> np.ndarray:
    """Clamped uniform knot vector over [t_start, t_start + total_time].

    Interior knots are unit fractions scaled by total_time, so knot placement
    agrees bitwise with fraction-based sample grids (sampling a discontinuous
    top derivative exactly at a knot then picks the same segment everywhere).
    """
    if not total_time > 0.0:
        raise ValueError(f"total_time must be positive, got {total_time}")
    p, m = space.degree, space.knot_m
    interior = t_start + total_time * np.linspace(0.0, 1.0, m - 2 * p + 1)
    return np.concatenate([np.full(p, t_start), interior, np.full(p, t_start + total_time)])


def _find_spans(knots: np.ndarray, degree: int, ts: np.ndarray) -> np.ndarray:
    # span i such that knots[i] <= t < knots[i+1], clamped to the valid range
    # [degree, len(knots)-degree-2]; right-continuous except at the domain end.
    spans = np.searchsorted(knots, ts, side="right") - 1
    return np.clip(spans, degree, len(knots) - degree - 2)


def _deboor(knots: np.ndarray, ctrl: np.ndarray, degree: int, ts: np.ndarray) -> np.ndarray:
    """Vectorized de Boor evaluation at times ts. Returns (len(ts), dim)."""
    spans = _find_spans(knots, degree, ts)
    # working points d_j, j = 0..p, gathered per evaluation time
    idx = spans[:, None] - degree + np.arange(degree + 1)[None, :]
    d = ctrl[idx].astype(float)  # (N, p+1, dim)
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = spans - degree + j
            denom = knots[i + degree - r + 1] - knots[i]
            alpha = (ts - knots[i]) / denom
            d[:, j, :] = (1.0 - alpha)[:, None] * d[:, j - 1, :] + alpha[:, None] * d[:, j, :]
    return d[:, degree, :]


def basis_matrix(space: SplineSpace, t_start: float, total_time: float, ts: np.ndarray) -> np.ndarray:
    """Matrix B with B[i, l] = phi_l(ts[i]) for the space's basis functions."""
    knots = make_knots(space, t_start, total_time)
    ts = np.asarray(ts, dtype=float)
    eye = np.eye(space.n_ctrl)
    return _deboor(knots, eye, space.degree, ts)


def derivative_cp_matrix(knots: np.ndarray, degree: int) -> np.ndarray:
    """Matrix D mapping control points to derivative control points.

    Row l encodes v_l = p (q_{l+1} - q_l) / (t_{l+p+1} - t_{l+1}).
    """
    n_ctrl = len(knots) - degree - 1
    D = np.zeros((n_ctrl - 1, n_ctrl))
    for l in range(n_ctrl - 1):
        denom = knots[l + degree + 1] - knots[l + 1]
        D[l, l] = -degree / denom
        D[l, l + 1] = degree / denom
    return D


@dataclass(frozen=True)
class Spline:
    """A clamped uniform B-spline over [t_start, t_start + total_time]."""

    space: SplineSpace
    t_start: float
    total_time: float
    control_points: np.ndarray  # (n+1, dim)
    knots: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cps = np.atleast_2d(np.asarray(self.control_points, dtype=float))
        if cps.shape != (self.space.n_ctrl, self.space.dim):
            raise ValueError(
                f"expected {self.space.n_ctrl}x{self.space.dim} control points, got {cps.shape}"
            )
        object.__setattr__(self, "control_points", cps)
        object.__setattr__(
            self, "knots", make_knots(self.space, self.t_start, self.total_time)
        )

    @property
    def t_end(self) -> float:
        return self.t_start + self.total_time

    def eval(self, t, order: int = 0) -> np.ndarray:
        """Value of the order-th time derivative at t (scalar or array).

        order 0 is position; order must be <= degree.
        """
        if not 0 <= order <= self.space.degree:
            raise ValueError(f"order must be in 0..{self.space.degree}, got {order}")
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        tol = 1e-9 * (1.0 + abs(self.total_time) + abs(self.t_start))
        if ts.min() < self.t_start - tol or ts.max() > self.t_end + tol:
            raise ValueError(
                f"t outside spline domain [{self.t_start}, {self.t_end}]"
            )
        knots, ctrl, degree = self.knots, self.control_points, self.space.degree
        for _ in range(order):
            ctrl = derivative_cp_matrix(knots, degree) @ ctrl
            knots = knots[1:-1]
            degree -= 1
        out = _deboor(knots, ctrl, degree, np.clip(ts, self.t_start, self.t_end))
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return out[0]
        return out

    def derivative(self) -> "Spline":
        """Spline of degree p-1 whose evaluation is d/dt of this one."""
        if self.space.degree < 1:
            raise ValueError("cannot differentiate a degree-0 spline")
        D = derivative_cp_matrix(self.knots, self.space.degree)
        new_space = SplineSpace(self.space.degree - 1, self.space.knot_m - 2, self.space.dim)
        return Spline(new_space, self.t_start, self.total_time, D @ self.control_points)


def fit(space: SplineSpace, samples) -> Spline:
    """Least-squares spline fit to (t, point) samples.

    The spline interval is the sample time span; the normal equations carry a
    1e-12 diagonal regularizer so degenerate-but-sufficient sample sets solve.
    """
    ts = np.asarray([s[0] for s in samples], dtype=float)
    ys = np.asarray([s[1] for s in samples], dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    if len(ts) < space.n_ctrl:
        raise ValueError(f"need at least {space.n_ctrl} samples, got {len(ts)}")
    if len(np.unique(ts)) < space.n_ctrl:
        raise ValueError("too few distinct sample times: normal equations rank-deficient")
    t_start = float(ts.min())
    total_time = float(ts.max() - t_start)
    if not total_time > 0.0:
        raise ValueError("sample times must span a positive interval")
    A = basis_matrix(space, t_start, total_time, ts)
    gram = A.T @ A + 1e-12 * np.eye(space.n_ctrl)
    coeffs = np.linalg.solve(gram, A.T @ ys)
    return Spline(space, t_start, total_time, coeffs)


def fit_residual_rms(spline: Spline, samples) -> float:
    ts = np.asarray([s[0] for s in samples], dtype=float)
    ys = np.asarray([s[1] for s in samples], dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    res = spline.eval(ts, 0) - ys
    return float(np.sqrt(np.mean(res**2)))


@dataclass(frozen=True)
class ActionTuple:
    """One planner mode: the 4 free position control points (frame f) plus total time.

    Flattens to 13 scalars: q3..q6 row-major, then T.
    """

    qhat: np.ndarray  # (4, 3)
    total_time: float

    def __post_init__(self):
        q = np.asarray(self.qhat, dtype=float).reshape(4, 3)
        object.__setattr__(self, "qhat", q)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.qhat.ravel(), [self.total_time]])

    @staticmethod
    def from_flat(x) -> "ActionTuple":
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (13,):
            raise ValueError(f"action tuple flattens to 13 scalars, got {x.shape}")
        return ActionTuple(x[:12].reshape(4, 3), float(x[12]))


def impose_boundary_conditions(
    action: ActionTuple,
    d: np.ndarray,
    v_in: np.ndarray,
    a_in: np.ndarray,
    t_start: float = 0.0,
) -> Spline:
    """Full 9-control-point position spline from an action and initial conditions.

    The first three control points pin p(t_in)=d, v(t_in)=v_in, a(t_in)=a_in;
    the last two repeat q6 so the trajectory ends at rest (v=a=0 at t_f).
    """
    T = action.total_time
    if not T > 0.0:
        raise ValueError(f"total_time must be positive, got {T}")
    d = np.asarray(d, dtype=float)
    v_in = np.asarray(v_in, dtype=float)
    a_in = np.asarray(a_in, dtype=float)
    delta = T / 6.0  # knot spacing of S^3_{3,12}
    q = np.empty((9, 3))
    q[0] = d
    q[1] = q[0] + (delta / 3.0) * v_in
    # from the clamped endpoint identities: a(t_in) = 2(v_1 - v_0)/delta with
    # v_0 = 3(q1-q0)/delta, v_1 = 3(q2-q1)/(2 delta)
    q[2] = q[1] + (2.0 * delta / 3.0) * (v_in + (delta / 2.0) * a_in)
    q[3:7] = action.qhat
    q[7] = q[6]
    q[8] = q[6]
    return Spline(POS_SPACE, t_start, T, q)
