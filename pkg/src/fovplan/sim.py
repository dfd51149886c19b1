"""Dynamic-obstacle world, observation construction, replan-select-execute loop, DAgger.

The simulator plays back committed trajectories kinematically (perfect
tracking) on a fixed tick. Every replan period it builds the observation at
the point one period ahead on the committed trajectory, queries the planner
(student or expert), imposes boundary conditions, derives the yaw profile,
filters candidates by collision against every obstacle's predicted future and
commits the cheapest survivor; if none survives it keeps the previous
commitment and flags a fallback.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .costs import (
    BoxPair,
    CostWeights,
    DynamicLimits,
    augmented_cost,
    clearance_ratio,
    collision_free,
    safety_ratio,
)
from .expert import ExpertConfig, expert_plan
from .frames import UAVState, f_to_world, world_to_f
from .policy import Observation, Policy, train
from .splines import OBST_SPACE, POS_SPACE, ActionTuple, Spline, fit, impose_boundary_conditions
from .yaw import PsiTrajectory, psi_profile

OBSTACLE_KINDS = ("static", "trefoil", "square", "eight", "epitrochoid")
N_FIT_SAMPLES = 48  # ground-truth future samples per obstacle spline fit


@dataclass(frozen=True)
class ObstacleSpec:
    """A moving (or static) obstacle: parametric closed curve plus bounding box."""

    kind: str
    offset: np.ndarray
    scale: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0]))
    phase: float = 0.0
    period: float = 10.0
    s_obst: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.8, 0.8]))

    def __post_init__(self):
        if self.kind not in OBSTACLE_KINDS:
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        for name in ("offset", "scale", "s_obst"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def position(self, t) -> np.ndarray:
        return obstacle_position(self, t)


def _square_loop(u: np.ndarray) -> np.ndarray:
    """Unit square loop through (+-1, +-1, 0), constant speed, u in [0, 1)."""
    s = 8.0 * np.mod(u, 1.0)
    corners = np.array([[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, -1.0, 0.0], [1.0, -1.0, 0.0]])
    edge = np.minimum((s / 2.0).astype(int), 3)
    frac = (s - 2.0 * edge) / 2.0
    a = corners[edge]
    b = corners[(edge + 1) % 4]
    return a + frac[..., None] * (b - a)


def obstacle_position(spec: ObstacleSpec, t) -> np.ndarray:
    """Ground-truth obstacle position; t scalar or array."""
    t = np.asarray(t, dtype=float)
    tau = 2.0 * np.pi * t / spec.period + spec.phase
    if spec.kind == "static":
        base = np.zeros(t.shape + (3,))
    elif spec.kind == "trefoil":
        base = np.stack(
            [
                np.sin(tau) + 2.0 * np.sin(2.0 * tau),
                np.cos(tau) - 2.0 * np.cos(2.0 * tau),
                -np.sin(3.0 * tau),
            ],
            axis=-1,
        ) / 3.0
    elif spec.kind == "eight":
        base = np.stack([np.cos(tau), np.sin(tau) * np.cos(tau), np.zeros_like(tau)], axis=-1)
    elif spec.kind == "epitrochoid":
        r_e = 2.0 / 9.0  # R = 2 r_e, d = 1.5 r_e, normalized to unit amplitude
        base = np.stack(
            [
                3.0 * r_e * np.cos(tau) - 1.5 * r_e * np.cos(3.0 * tau),
                3.0 * r_e * np.sin(tau) - 1.5 * r_e * np.sin(3.0 * tau),
                np.zeros_like(tau),
            ],
            axis=-1,
        )
    else:  # square
        base = _square_loop(tau / (2.0 * np.pi))
    return spec.offset + spec.scale * base


def obstacle_spline(spec, t0: float, t_pred: float) -> Spline:
    """Spline fit to the ground-truth future over [t0, t0 + t_pred]; 10 control points.

    spec is anything exposing position(t) for vector t (ObstacleSpec included).
    """
    if not t_pred > 0:
        raise ValueError("t_pred must be positive")
    ts = np.linspace(t0, t0 + t_pred, N_FIT_SAMPLES)
    return fit(OBST_SPACE, list(zip(ts, spec.position(ts))))


def project_goal(g_term: np.ndarray, d: np.ndarray, radius: float) -> np.ndarray:
    """Projection of the terminal goal onto the sphere of given radius around d."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    g_term = np.asarray(g_term, dtype=float)
    d = np.asarray(d, dtype=float)
    delta = g_term - d
    dist = float(np.linalg.norm(delta))
    if dist <= radius:
        return g_term.copy()
    return d + (radius / dist) * delta


@dataclass(frozen=True)
class MissionConfig:
    g_terms: tuple  # terminal goals, cycled when reached
    start_p: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    sphere_radius: float = 4.0
    replan_period: float = 0.4
    tick: float = 0.05
    t_pred: float = 6.0
    goal_reach_tol: float = 0.5
    s_uav: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.25]))
    weights: CostWeights = field(default_factory=CostWeights)
    limits: DynamicLimits = field(default_factory=DynamicLimits)
    n_select_samples: int = 40

    def __post_init__(self):
        object.__setattr__(self, "g_terms", tuple(np.asarray(g, dtype=float) for g in self.g_terms))
        object.__setattr__(self, "start_p", np.asarray(self.start_p, dtype=float))
        object.__setattr__(self, "s_uav", np.asarray(self.s_uav, dtype=float))
        if not self.sphere_radius > 0 or not self.replan_period > 0:
            raise ValueError("sphere_radius and replan_period must be positive")


@dataclass
class CommittedPlan:
    """Currently executing trajectory; hovers at its endpoint after t_end."""

    pos: Spline | None  # None: pure hover commitment
    psi: PsiTrajectory | None
    hover_p: np.ndarray
    hover_psi: float

    @staticmethod
    def hover(p: np.ndarray, psi: float) -> "CommittedPlan":
        return CommittedPlan(None, None, np.asarray(p, dtype=float), float(psi))

    def state_at(self, t: float) -> UAVState:
        if self.pos is None or t >= self.pos.t_end:
            return UAVState(self.hover_p, np.zeros(3), np.zeros(3), self.hover_psi, 0.0)
        t = max(t, self.pos.t_start)
        return UAVState(
            self.pos.eval(t, 0),
            self.pos.eval(t, 1),
            self.pos.eval(t, 2),
            float(self.psi.spline.eval(t, 0)[0]),
            float(self.psi.spline.eval(t, 1)[0]),
        )


@dataclass
class ReplanRecord:
    time: float
    observation: np.ndarray
    n_candidates: int
    n_collision_free: int
    chosen_index: int | None
    fallback: bool
    costs: list
    collision_free_flags: list
    predict_latency: float | None = None
    expert_latency: float | None = None
    actions: list | None = None  # flattened candidate actions (for labeling/datasets)
    expert_costs: list | None = None

    def to_json(self) -> dict:
        return {
            "time": self.time,
            "observation": self.observation.tolist(),
            "n_candidates": self.n_candidates,
            "n_collision_free": self.n_collision_free,
            "chosen_index": self.chosen_index,
            "fallback": self.fallback,
            "costs": [float(c) for c in self.costs],
            "collision_free": [bool(b) for b in self.collision_free_flags],
            "predict_latency": self.predict_latency,
            "expert_latency": self.expert_latency,
        }


def select_obstacle(specs, committed: CommittedPlan, t0: float, cfg: MissionConfig) -> int:
    """Most threatening obstacle: smallest box-normalized clearance to the committed path.

    The margin per obstacle is min over sampled times of max over axes of
    |kappa_j| / rho_j (the box-separation certificate); ties break to the
    lowest index. The max over axes matters: a min would be zero for any
    obstacle sharing one axis coordinate with the path, however distant.
    """
    if len(specs) == 0:
        raise ValueError("empty obstacle list")
    if len(specs) == 1:
        return 0
    ts = np.linspace(t0, t0 + cfg.t_pred, cfg.n_select_samples)
    ps = np.asarray([committed.state_at(t).p for t in ts])
    margins = []
    for spec in specs:
        rho = BoxPair(spec.s_obst, cfg.s_uav).rho
        diff = np.abs(ps - spec.position(ts))
        margins.append(float(np.min(np.max(diff / rho, axis=1))))
    return int(np.argmin(margins))


def build_observation(
    state: UAVState,
    specs,
    g_term: np.ndarray,
    cfg: MissionConfig,
    t0: float,
    committed: CommittedPlan | None = None,
):
    """Observation at planning point d = state.p, plus the world obstacle splines.

    Velocity/acceleration transform as vectors, the projected goal and the
    selected obstacle's spline control points as points about (d, psi).
    """
    splines_w = [obstacle_spline(spec, t0, cfg.t_pred) for spec in specs]
    if len(specs) > 1:
        if committed is None:
            raise ValueError("obstacle selection needs the committed trajectory")
        sel = select_obstacle(specs, committed, t0, cfg)
    else:
        sel = 0
    g = project_goal(g_term, state.p, cfg.sphere_radius)
    obs = Observation(
        v_f=world_to_f(state, state.v, is_point=False),
        a_f=world_to_f(state, state.a, is_point=False),
        g_f=world_to_f(state, g, is_point=True),
        psi_dot=state.psi_dot,
        q_obst_f=world_to_f(state, splines_w[sel].control_points, is_point=True),
        s_obst=specs[sel].s_obst,
    )
    return obs, sel, splines_w


def evaluate_candidates(
    obs: Observation,
    actions,
    weights: CostWeights,
    limits: DynamicLimits,
    s_uav,
    t_pred: float,
):
    """Rank candidate actions against the observation, all in frame f.

    Returns a list of (collision_free, augmented_cost) in input order; costs
    are frame-invariant so these match the world-frame evaluation.
    """
    obst = Spline(OBST_SPACE, 0.0, t_pred, obs.q_obst_f)
    boxes = BoxPair(obs.s_obst, s_uav)
    out = []
    for action in actions:
        pos = impose_boundary_conditions(action, np.zeros(3), obs.v_f, obs.a_f)
        psi = psi_profile(pos, obst)
        ok = collision_free(pos, obst, boxes)
        out.append((ok, augmented_cost(pos, psi, obst, obs.g_f, weights, limits)))
    return out


def solutions_from_record(rec: ReplanRecord):
    """Reinterpret a replan record's candidates as expert solutions (expert rollouts)."""
    from .expert import ExpertSolution

    return [
        ExpertSolution(ActionTuple.from_flat(a), c) for a, c in zip(rec.actions or [], rec.costs)
    ]


def student_planner(policy: Policy):
    def plan(obs: Observation):
        return policy.predict(obs), "student"

    return plan


def expert_planner(cfg: ExpertConfig, w: CostWeights, lim: DynamicLimits):
    def plan(obs: Observation):
        sols = expert_plan(obs, cfg, w, lim)
        return [s.action for s in sols], "expert"

    return plan


def replan_step(
    planner,
    world,
    cfg: MissionConfig,
    committed: CommittedPlan,
    t_now: float,
    g_term: np.ndarray,
):
    """One replanning step; returns (new commitment or None, record).

    Plans from the point one replan period ahead on the committed trajectory;
    fallback (None) keeps the previous commitment.
    """
    t_d = t_now + cfg.replan_period
    state = committed.state_at(t_d)
    specs = list(world)
    if not specs:
        # empty world: a distant virtual obstacle toward the goal keeps the
        # 43-real observation well-formed and points the camera down-track
        look = g_term - state.p
        norm = np.linalg.norm(look)
        direction = look / norm if norm > 1e-9 else np.array([1.0, 0.0, 0.0])
        specs = [ObstacleSpec("static", offset=state.p + 500.0 * direction, s_obst=[0.1, 0.1, 0.1])]
    obs, sel, splines_w = build_observation(state, specs, g_term, cfg, t_d, committed)

    t_start = _time.perf_counter()
    actions, planner_kind = planner(obs)
    latency = _time.perf_counter() - t_start

    g_world = project_goal(g_term, state.p, cfg.sphere_radius)
    candidates = []
    for action in actions:
        pos_f = impose_boundary_conditions(action, np.zeros(3), obs.v_f, obs.a_f, t_start=t_d)
        cps_w = f_to_world(state, pos_f.control_points, is_point=True)
        pos_w = Spline(POS_SPACE, t_d, action.total_time, cps_w)
        psi = psi_profile(pos_w, splines_w[sel])
        ok = all(
            collision_free(pos_w, sw, BoxPair(spec.s_obst, cfg.s_uav))
            for sw, spec in zip(splines_w, world)  # only real obstacles constrain
        )
        cost = augmented_cost(pos_w, psi, splines_w[sel], g_world, cfg.weights, cfg.limits)
        candidates.append((pos_w, psi, ok, cost))

    flags = [c[2] for c in candidates]
    costs = [c[3] for c in candidates]
    chosen = None
    for i, (ok, cost) in enumerate(zip(flags, costs)):
        if ok and (chosen is None or cost < costs[chosen]):
            chosen = i

    record = ReplanRecord(
        time=t_now,
        observation=obs.to_vector(),
        n_candidates=len(candidates),
        n_collision_free=int(sum(flags)),
        chosen_index=chosen,
        fallback=chosen is None,
        costs=costs,
        collision_free_flags=flags,
        predict_latency=latency if planner_kind == "student" else None,
        expert_latency=latency if planner_kind == "expert" else None,
        actions=[a.flatten() for a in actions],
    )
    if chosen is None:
        return None, record
    pos_w, psi, _, _ = candidates[chosen]
    plan = CommittedPlan(pos_w, psi, pos_w.control_points[-1].copy(), float(psi.spline.eval(pos_w.t_end, 0)[0]))
    return plan, record


@dataclass
class MissionLog:
    records: list
    executed: list  # (t, p, psi)
    goals_reached: int
    safety: float  # paper-literal min over axes
    clearance: float  # exact box-separation certificate (> 1 means never inside)
    duration: float

    def collision_free_counts(self) -> np.ndarray:
        return np.asarray([r.n_collision_free for r in self.records], dtype=int)

    def summary(self) -> dict:
        counts = self.collision_free_counts()
        n = max(len(counts), 1)
        return {
            "replans": len(counts),
            "pct_zero": 100.0 * float(np.sum(counts == 0)) / n,
            "pct_1_3": 100.0 * float(np.sum((counts >= 1) & (counts <= 3))) / n,
            "pct_4_6": 100.0 * float(np.sum(counts >= 4)) / n,
            "goals_reached": self.goals_reached,
            "safety_ratio": self.safety,
            "clearance_ratio": self.clearance,
            "fallbacks": int(sum(r.fallback for r in self.records)),
        }


def run_mission(
    planner,
    world,
    cfg: MissionConfig,
    duration: float,
    stop_at_goal: bool = False,
) -> MissionLog:
    """Kinematic playback with periodic replanning and goal cycling."""
    g_idx = 0
    g_term = cfg.g_terms[g_idx]
    look = g_term - cfg.start_p
    start_psi = float(np.arctan2(look[1], look[0])) if np.linalg.norm(look[:2]) > 1e-9 else 0.0
    current = CommittedPlan.hover(cfg.start_p, start_psi)
    pending: tuple[float, CommittedPlan] | None = None

    records: list[ReplanRecord] = []
    executed = []
    goals_reached = 0
    at_goal = False
    n_ticks = int(round(duration / cfg.tick))
    ticks_per_replan = max(int(round(cfg.replan_period / cfg.tick)), 1)

    for k in range(n_ticks + 1):
        t = k * cfg.tick
        if pending is not None and t >= pending[0] - 1e-9:
            current = pending[1]
            pending = None
        if k % ticks_per_replan == 0 and k < n_ticks:
            plan, rec = replan_step(planner, world, cfg, current, t, g_term)
            records.append(rec)
            if plan is not None:
                pending = (t + cfg.replan_period, plan)
        state = current.state_at(t)
        executed.append((t, state.p.copy(), state.psi))
        if np.linalg.norm(state.p - g_term) <= cfg.goal_reach_tol:
            if not at_goal:
                goals_reached += 1
                at_goal = True
                if stop_at_goal:
                    break
                g_idx = (g_idx + 1) % len(cfg.g_terms)
                g_term = cfg.g_terms[g_idx]
        else:
            at_goal = False

    obstacles = [(spec.position, BoxPair(spec.s_obst, cfg.s_uav)) for spec in world]
    log_tp = [(t, p) for t, p, _ in executed]
    safety = safety_ratio(log_tp, obstacles) if world else np.inf
    clearance = clearance_ratio(log_tp, obstacles) if world else np.inf
    return MissionLog(records, executed, goals_reached, safety, clearance, executed[-1][0])


def sample_trefoil_world(rng: np.random.Generator, corridor: float = 6.0):
    """Randomized trefoil obstacle between start and goal, plus the terminal goal."""
    g_term = np.array(
        [rng.uniform(0.75, 1.15) * corridor, rng.uniform(-2.0, 2.0), rng.uniform(0.6, 1.6)]
    )
    mid = np.array([0.0, 0.0, 1.0]) + 0.5 * (g_term - np.array([0.0, 0.0, 1.0]))
    spec = ObstacleSpec(
        kind="trefoil",
        offset=mid + np.array([rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.2, 0.6)]),
        scale=rng.uniform(0.8, 1.6, size=3),
        phase=rng.uniform(0.0, 2.0 * np.pi),
        period=rng.uniform(8.0, 14.0),
        s_obst=np.array([0.8, 0.8, 0.8]),
    )
    return spec, g_term


def _records_to_demos(records, labeler):
    from .dataset import Demonstration

    demos = []
    for rec in records:
        sols = labeler(rec)
        if not sols:
            continue
        demos.append(
            Demonstration(
                rec.observation,
                np.asarray([s.action.flatten() for s in sols]),
                np.asarray([s.cost for s in sols]),
            )
        )
    return demos


def dagger_collect(
    expert_cfg: ExpertConfig,
    weights: CostWeights,
    limits: DynamicLimits,
    iterations: int = 3,
    episodes_per_iter: int = 6,
    episode_duration: float = 10.0,
    seed: int = 0,
    corridor: float = 6.0,
    train_kwargs: dict | None = None,
    initial_policy: Policy | None = None,
):
    """DAgger on randomized trefoil worlds.

    Iteration 0 rolls out the expert (its own plans are the labels);
    later iterations roll out the current student and label every visited
    observation with the expert. The dataset is aggregated across iterations
    and the student retrained after each one. Returns (demos, policy, history).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    train_kwargs = dict(train_kwargs or {})
    train_kwargs.setdefault("n_s", expert_cfg.n_s)
    train_kwargs.setdefault("t_min", expert_cfg.t_min)
    train_kwargs.setdefault("t_pred", expert_cfg.t_pred)
    demos = []
    policy = initial_policy
    history = []

    def expert_label(rec):
        obs = Observation.from_vector(rec.observation)
        return expert_plan(obs, expert_cfg, weights, limits)

    for it in range(iterations):
        use_expert = it == 0 and policy is None
        planner = (
            expert_planner(expert_cfg, weights, limits) if use_expert else student_planner(policy)
        )
        # expert rollouts already carry their own labels
        labeler = solutions_from_record if use_expert else expert_label
        new = 0
        for _ in range(episodes_per_iter):
            spec, g_term = sample_trefoil_world(rng, corridor)
            cfg = MissionConfig(g_terms=(g_term,))
            log = run_mission(planner, [spec], cfg, episode_duration, stop_at_goal=True)
            batch = _records_to_demos(log.records, labeler)
            demos.extend(batch)
            new += len(batch)
        policy, curve = train(demos, seed=seed, **train_kwargs)
        history.append({"iteration": it, "new_demos": new, "total": len(demos), "final_loss": float(curve[-1])})
    return demos, policy, history
