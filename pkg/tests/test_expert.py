import numpy as np
import pytest

from fovplan.costs import BoxPair, CostWeights, DynamicLimits, collision_free, collision_penetration
from fovplan.expert import ExpertConfig, expert_plan, initial_guesses, optimize_single
from fovplan.policy import Observation
from fovplan.splines import OBST_SPACE, ActionTuple, Spline, impose_boundary_conditions


def make_obs(goal=(4.0, 0.0, 0.0), obstacle=(2.5, 0.0, 0.0), s_obst=(0.8, 0.8, 0.8), v=(0, 0, 0)):
    return Observation(
        v_f=np.asarray(v, dtype=float),
        a_f=np.zeros(3),
        g_f=np.asarray(goal, dtype=float),
        psi_dot=0.0,
        q_obst_f=np.tile(obstacle, (10, 1)).astype(float),
        s_obst=np.asarray(s_obst, dtype=float),
    )


FAR_OBS = make_obs(obstacle=(500.0, 0.0, 0.0))


def test_initial_guesses_single_run_is_straight_line():
    cfg = ExpertConfig(n_runs=1)
    seeds = initial_guesses(make_obs(), cfg)
    assert len(seeds) == 1
    np.testing.assert_allclose(seeds[0].qhat, np.outer([0.25, 0.5, 0.75, 1.0], [4.0, 0, 0]))
    assert 0 < seeds[0].total_time <= cfg.t_pred


def test_initial_guesses_ten_distinct():
    seeds = initial_guesses(make_obs(), ExpertConfig(n_runs=10))
    assert len(seeds) == 10
    for i in range(10):
        for j in range(i + 1, 10):
            assert np.max(np.abs(seeds[i].qhat - seeds[j].qhat)) > 1e-9


def test_initial_guesses_detours_clear_inflated_box():
    # obstacle dead center on the start-goal segment
    cfg = ExpertConfig(n_runs=10)
    obs = make_obs()
    rho = (obs.s_obst + cfg.s_uav) / 2.0
    clear = 0
    for seed in initial_guesses(obs, cfg):
        mid = seed.qhat[1:3]  # the fully displaced middle control points
        offset = np.abs(mid - np.array([2.5, 0.0, 0.0]))
        if all(np.any(o >= rho) for o in offset):
            clear += 1
    assert clear >= 4


def test_initial_guesses_jitter_deterministic():
    cfg_a = ExpertConfig(n_runs=5, guess_jitter=0.15, seed=42)
    cfg_b = ExpertConfig(n_runs=5, guess_jitter=0.15, seed=42)
    sa = initial_guesses(make_obs(), cfg_a)
    sb = initial_guesses(make_obs(), cfg_b)
    for a, b in zip(sa, sb):
        assert np.array_equal(a.qhat, b.qhat)
    cfg_c = ExpertConfig(n_runs=5, guess_jitter=0.15, seed=43)
    sc = initial_guesses(make_obs(), cfg_c)
    assert any(not np.array_equal(a.qhat, c.qhat) for a, c in zip(sa, sc))


def test_optimize_descends_without_obstacle():
    cfg = ExpertConfig(n_runs=1, max_iters=120)
    w, lim = CostWeights(), DynamicLimits()
    seed = initial_guesses(FAR_OBS, cfg)[0]
    # start from a deliberately bad seed
    bad = ActionTuple(seed.qhat + 1.5, seed.total_time)
    res = optimize_single(bad, FAR_OBS, cfg, w, lim)
    assert res.trace[-1] <= res.trace[0]
    assert np.all(np.diff(res.trace) < 0)
    assert res.feasible


def test_optimize_reduces_penetration_from_colliding_seed():
    cfg = ExpertConfig(n_runs=1, max_iters=150)
    w, lim = CostWeights(), DynamicLimits()
    obs = make_obs()
    obst = Spline(OBST_SPACE, 0.0, cfg.t_pred, obs.q_obst_f)
    boxes = BoxPair(obs.s_obst, cfg.s_uav)
    seed = ActionTuple(np.tile([2.5, 0.0, 0.0], (4, 1)), 4.0)  # inside the box

    def penetration(action):
        pos = impose_boundary_conditions(action, np.zeros(3), obs.v_f, obs.a_f)
        return collision_penetration(pos, obst, boxes)

    res = optimize_single(seed, obs, cfg, w, lim)
    assert penetration(res.action) < penetration(seed)


def test_optimize_rejects_bad_seed_time():
    cfg = ExpertConfig()
    with pytest.raises(ValueError):
        optimize_single(ActionTuple(np.zeros((4, 3)), 7.0), make_obs(), cfg, CostWeights(), DynamicLimits())


def test_optimize_rejects_nonfinite_seed():
    cfg = ExpertConfig()
    with pytest.raises(ValueError):
        optimize_single(ActionTuple(np.full((4, 3), np.nan), 4.0), make_obs(), cfg, CostWeights(), DynamicLimits())


def test_expert_plan_multimodal_around_centered_obstacle():
    cfg = ExpertConfig()
    sols = expert_plan(make_obs(), cfg, CostWeights(), DynamicLimits())
    assert len(sols) >= 2
    y_means = [s.action.qhat[:, 1].mean() for s in sols]
    assert min(y_means) < 0 < max(y_means)


def test_expert_plan_single_mode_without_obstacle():
    cfg = ExpertConfig(n_runs=6, max_iters=200)
    sols = expert_plan(FAR_OBS, cfg, CostWeights(), DynamicLimits())
    assert len(sols) == 1


def test_expert_plan_outputs_sorted_feasible_and_within_horizon():
    cfg = ExpertConfig()
    w, lim = CostWeights(), DynamicLimits()
    obs = make_obs(goal=(4.0, 0.6, 0.2))
    sols = expert_plan(obs, cfg, w, lim)
    assert 1 <= len(sols) <= cfg.n_s
    costs = [s.cost for s in sols]
    assert costs == sorted(costs)
    obst = Spline(OBST_SPACE, 0.0, cfg.t_pred, obs.q_obst_f)
    boxes = BoxPair(obs.s_obst, cfg.s_uav)
    for s in sols:
        assert 0 < s.action.total_time <= cfg.t_pred
        pos = impose_boundary_conditions(s.action, np.zeros(3), obs.v_f, obs.a_f)
        assert collision_free(pos, obst, boxes)


def test_expert_plan_deterministic():
    cfg = ExpertConfig(n_runs=4, max_iters=80)
    w, lim = CostWeights(), DynamicLimits()
    obs = make_obs()
    a = expert_plan(obs, cfg, w, lim)
    b = expert_plan(obs, cfg, w, lim)
    assert len(a) == len(b)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.action.flatten(), sb.action.flatten())
        assert sa.cost == sb.cost


def test_expert_plan_dedupes_duplicate_solutions():
    # without an obstacle all runs fall into one basin: dedupe keeps one
    cfg = ExpertConfig(n_runs=8, max_iters=200)
    sols = expert_plan(FAR_OBS, cfg, CostWeights(), DynamicLimits())
    assert len(sols) == 1


def test_expert_plan_empty_when_everything_collides():
    # obstacle box so large every candidate collides
    obs = make_obs(s_obst=(60.0, 60.0, 60.0))
    cfg = ExpertConfig(n_runs=3, max_iters=40)
    sols = expert_plan(obs, cfg, CostWeights(), DynamicLimits())
    assert sols == []
