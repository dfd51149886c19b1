"""Multimodal optimization-based expert: multi-start descent over (q_hat, T).

Each run is a deterministic coordinate-wise finite-difference gradient descent
with backtracking on the augmented cost plus a quadratic collision-penetration
penalty, started from geometric homotopy guesses (straight line to the goal
plus up/down/left/right detours around the inflated obstacle box). Feasible
results are deduplicated by control-point RMS distance and the best
n_e = min(n_sols, n_s) are returned in ascending augmented cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .costs import BoxPair, CostWeights, DynamicLimits, augmented_cost, collision_free
from .frames import GRAVITY
from .policy import Observation
from .splines import OBST_SPACE, ActionTuple, Spline, impose_boundary_conditions
from .yaw import psi_profile


@dataclass(frozen=True)
class ExpertConfig:
    n_runs: int = 10
    n_s: int = 6
    t_pred: float = 6.0
    t_min: float = 0.3
    dedupe_threshold: float = 0.35  # control-point RMS distance, meters
    mu_coll: float = 1e3
    # penalty acts on the box inflated by this margin; the quadratic penalty's
    # equilibrium sits slightly inside its boundary, the margin keeps that
    # equilibrium outside the true inflated box
    coll_margin: float = 0.05
    max_iters: int = 300
    fd_step: float = 1e-4
    init_step: float = 0.5  # meters, along the normalized descent direction
    step_grow: float = 1.6
    step_shrink: float = 0.5
    max_step: float = 2.0
    min_step: float = 1e-6
    max_backtracks: int = 30
    stall_window: int = 25
    stall_tol: float = 1e-8
    v_nominal: float = 1.5  # seeds the total-time guess
    t_slack: float = 1.0
    s_uav: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.25]))
    guess_jitter: float = 0.0  # uniform +- jitter on seed control points, meters
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "s_uav", np.asarray(self.s_uav, dtype=float))
        if self.n_runs < 1 or self.n_s < 1:
            raise ValueError("n_runs and n_s must be >= 1")
        if not 0 < self.t_min < self.t_pred:
            raise ValueError("need 0 < t_min < t_pred")


@dataclass(frozen=True)
class ExpertSolution:
    action: ActionTuple
    cost: float  # augmented cost (no collision penalty; solution is collision-free)


@dataclass(frozen=True)
class OptimizeResult:
    action: ActionTuple
    cost: float  # reference augmented cost of the final iterate
    feasible: bool
    trace: np.ndarray  # penalized objective at accepted iterates, monotone


def initial_guesses(obs: Observation, cfg: ExpertConfig) -> list[ActionTuple]:
    """Geometric homotopy seeds: straight line plus perpendicular detours.

    Detours displace the middle control points sideways by k times the
    inflated-box extent in the detour direction, k = 1.5, 2.5, ... cycling
    over up/down/left/right; exactly n_runs tuples, pairwise distinct.
    """
    g = np.asarray(obs.g_f, dtype=float)
    dist = float(np.linalg.norm(g))
    t0 = float(np.clip(dist / cfg.v_nominal + cfg.t_slack, cfg.t_min, cfg.t_pred))
    straight = np.outer(np.array([0.25, 0.5, 0.75, 1.0]), g)

    g_dir = g / dist if dist > 1e-9 else np.array([1.0, 0.0, 0.0])
    lateral = np.cross(g_dir, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(lateral) < 1e-9:
        lateral = np.array([0.0, 1.0, 0.0])
    lateral = lateral / np.linalg.norm(lateral)
    vertical = np.cross(lateral, g_dir)
    vertical = vertical / np.linalg.norm(vertical)
    dirs = [vertical, -vertical, lateral, -lateral]

    rho = (np.asarray(obs.s_obst, dtype=float) + cfg.s_uav) / 2.0
    bump = np.array([0.5, 1.0, 1.0, 0.0])  # keep the endpoint on the goal
    guesses = [straight]
    for i in range(cfg.n_runs - 1):
        direction = dirs[i % 4]
        k = 1.5 + (i // 4)
        extent = float(np.abs(direction) @ rho)  # box support in that direction
        guesses.append(straight + np.outer(bump, k * extent * direction))
    guesses = guesses[: cfg.n_runs]

    if cfg.guess_jitter > 0.0 and cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        j = cfg.guess_jitter
        guesses = [q + rng.uniform(-j, j, size=(4, 3)) for q in guesses]
    return [ActionTuple(q, t0) for q in guesses]


def _context(obs: Observation, cfg: ExpertConfig, w: CostWeights, lim: DynamicLimits):
    obst = Spline(OBST_SPACE, 0.0, cfg.t_pred, obs.q_obst_f)
    boxes = BoxPair(obs.s_obst, cfg.s_uav)
    ctx = _kernels.make_context(
        obs.v_f, obs.a_f, obs.g_f, obst, boxes.rho + cfg.coll_margin, w, lim, cfg.mu_coll, GRAVITY
    )
    return ctx, obst, boxes


def _descend(x0: np.ndarray, ctx, cfg: ExpertConfig):
    """Finite-difference steepest descent with backtracking; strictly decreasing trace."""
    x = np.array(x0, dtype=float)
    x[12] = np.clip(x[12], cfg.t_min, cfg.t_pred)
    f = float(_kernels.evaluate_batch(ctx, x[None])[0])
    if not np.isfinite(f):
        raise ValueError("non-finite objective at seed")
    trace = [f]
    step = cfg.init_step
    for _ in range(cfg.max_iters):
        h = np.full(13, cfg.fd_step)
        if x[12] + h[12] > cfg.t_pred:
            h[12] = -cfg.fd_step
        probes = np.tile(x, (13, 1))
        probes[np.arange(13), np.arange(13)] += h
        grad = (_kernels.evaluate_batch(ctx, probes) - f) / h
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-12:
            break
        direction = grad / gnorm
        accepted = False
        trial = step
        for _ in range(cfg.max_backtracks):
            x_try = x - trial * direction
            x_try[12] = np.clip(x_try[12], cfg.t_min, cfg.t_pred)
            f_try = float(_kernels.evaluate_batch(ctx, x_try[None])[0])
            if f_try < f:
                x, f = x_try, f_try
                trace.append(f)
                step = min(trial * cfg.step_grow, cfg.max_step)
                accepted = True
                break
            trial *= cfg.step_shrink
            if trial < cfg.min_step:
                break
        if not accepted:
            break
        if len(trace) > cfg.stall_window:
            if trace[-cfg.stall_window - 1] - f < cfg.stall_tol * (1.0 + abs(f)):
                break
    return x, np.asarray(trace)


def optimize_single(
    seed: ActionTuple,
    obs: Observation,
    cfg: ExpertConfig,
    w: CostWeights,
    lim: DynamicLimits,
) -> OptimizeResult:
    """One local optimization from a seed; deterministic given the seed."""
    if not 0 < seed.total_time <= cfg.t_pred:
        raise ValueError("seed total time must be in (0, t_pred]")
    ctx, obst, boxes = _context(obs, cfg, w, lim)
    x, trace = _descend(seed.flatten(), ctx, cfg)
    action = ActionTuple.from_flat(x)
    pos = impose_boundary_conditions(action, np.zeros(3), obs.v_f, obs.a_f)
    psi = psi_profile(pos, obst)
    cost = augmented_cost(pos, psi, obst, obs.g_f, w, lim)
    return OptimizeResult(action, cost, collision_free(pos, obst, boxes), trace)


def _cp_rms(a: ActionTuple, b: ActionTuple) -> float:
    return float(np.sqrt(np.mean((a.qhat - b.qhat) ** 2)))


def expert_plan(
    obs: Observation,
    cfg: ExpertConfig,
    w: CostWeights,
    lim: DynamicLimits,
) -> list[ExpertSolution]:
    """All distinct locally optimal collision-free trajectories, best n_e first.

    Returns an empty list when every run ends in collision (the caller keeps
    its previous commitment in that case).
    """
    ctx, obst, boxes = _context(obs, cfg, w, lim)
    candidates = []
    for idx, seed in enumerate(initial_guesses(obs, cfg)):
        x, _ = _descend(seed.flatten(), ctx, cfg)
        action = ActionTuple.from_flat(x)
        pos = impose_boundary_conditions(action, np.zeros(3), obs.v_f, obs.a_f)
        psi = psi_profile(pos, obst)
        if not collision_free(pos, obst, boxes):
            continue
        cost = augmented_cost(pos, psi, obst, obs.g_f, w, lim)
        candidates.append((cost, idx, action))
    candidates.sort(key=lambda c: (c[0], c[1]))
    kept: list[ExpertSolution] = []
    for cost, _, action in candidates:
        if any(_cp_rms(action, s.action) < cfg.dedupe_threshold for s in kept):
            continue
        kept.append(ExpertSolution(action, cost))
        if len(kept) == cfg.n_s:
            break
    return kept
