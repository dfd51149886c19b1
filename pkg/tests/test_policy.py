import numpy as np
import pytest

from fovplan.dataset import Demonstration
from fovplan.policy import (
    ACTION_DIM,
    OBS_DIM,
    Normalizer,
    Observation,
    adam_init,
    adam_step,
    fit_normalizer,
    forward,
    init_params,
    loss_and_gradient,
    train,
)


def make_normalizer():
    obs = np.array([np.zeros(OBS_DIM), np.ones(OBS_DIM)])
    acts = [np.array([np.linspace(-1, 1, ACTION_DIM), np.linspace(-2, 2, ACTION_DIM)])]
    return fit_normalizer(obs, acts, t_min=0.3, t_pred=6.0)


def test_observation_roundtrip_is_43_reals():
    rng = np.random.default_rng(0)
    obs = Observation(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3), 0.7,
                      rng.normal(size=(10, 3)), np.array([0.8, 0.8, 0.8]))
    vec = obs.to_vector()
    assert vec.shape == (43,)
    back = Observation.from_vector(vec)
    np.testing.assert_array_equal(back.to_vector(), vec)
    with pytest.raises(ValueError):
        Observation.from_vector(np.zeros(42))


def test_forward_zero_weights_returns_biases():
    params = init_params(n_s=6, seed=0)
    params = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    W3, b3 = params[-1]
    params[-1] = (W3, np.arange(len(b3), dtype=float))
    out = forward(params, np.zeros(OBS_DIM))
    np.testing.assert_array_equal(out.ravel(), np.arange(78, dtype=float))


def test_forward_output_size_ns6():
    params = init_params(n_s=6, seed=1)
    out = forward(params, np.random.default_rng(1).uniform(-1, 1, OBS_DIM))
    assert out.shape == (6, 13) and out.size == 78


def test_forward_rejects_nonfinite():
    params = init_params(n_s=2, seed=0)
    bad = np.zeros(OBS_DIM)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        forward(params, bad)


def test_forward_lipschitz_bound():
    params = init_params(n_s=6, seed=2)
    bound = np.prod([np.linalg.norm(W, 2) for W, _ in params])
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, OBS_DIM)
    for i in (0, 17, 42):
        y = x.copy()
        y[i] += 1e-6
        delta = np.linalg.norm(forward(params, y) - forward(params, x))
        assert delta <= bound * 1e-6 * (1 + 1e-9)


def test_loss_zero_when_student_matches_expert():
    params = init_params(n_s=3, seed=4)
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, OBS_DIM)
    target = forward(params, x)  # use the network's own output as the expert set
    value, grads = loss_and_gradient(params, x[None], [target])
    assert value == pytest.approx(0.0, abs=1e-24)
    for gW, gb in grads:
        np.testing.assert_allclose(gW, 0.0, atol=1e-12)
        np.testing.assert_allclose(gb, 0.0, atol=1e-12)


def test_gradient_matches_fd_single_linear_layer():
    rng = np.random.default_rng(5)
    params = init_params(n_s=2, seed=5, hidden=())
    x = rng.uniform(-1, 1, size=(1, OBS_DIM))
    experts = [rng.uniform(-1, 1, size=(2, 13))]
    _, grads = loss_and_gradient(params, x, experts)
    W, b = params[0]
    for _ in range(20):
        i, j = rng.integers(W.shape[0]), rng.integers(W.shape[1])
        h = 1e-5

        def value(d):
            trial = [(W.copy(), b.copy())]
            trial[0][0][i, j] += d
            v, _ = loss_and_gradient(trial, x, experts)
            return v

        fd = (value(h) - value(-h)) / (2 * h)
        assert grads[0][0][i, j] == pytest.approx(fd, rel=1e-4, abs=1e-10)


def test_loss_permutation_invariance_expert_order():
    rng = np.random.default_rng(6)
    params = init_params(n_s=4, seed=6)
    x = rng.uniform(-1, 1, size=(1, OBS_DIM))
    e = rng.uniform(-1, 1, size=(3, 13))
    v1, _ = loss_and_gradient(params, x, [e])
    v2, _ = loss_and_gradient(params, x, [e[[2, 0, 1]]])
    assert v1 == pytest.approx(v2, rel=1e-12)


def test_loss_equivariance_student_head_order():
    # permuting student heads permutes assignment columns; loss unchanged
    rng = np.random.default_rng(7)
    params = init_params(n_s=3, seed=7)
    x = rng.uniform(-1, 1, size=OBS_DIM)
    e = rng.uniform(-1, 1, size=(2, 13))
    v1, _ = loss_and_gradient(params, x[None], [e])
    W3, b3 = params[-1]
    perm = np.r_[np.arange(13, 26), np.arange(0, 13), np.arange(26, 39)]
    params2 = params[:-1] + [(W3[:, perm], b3[perm])]
    v2, _ = loss_and_gradient(params2, x[None], [e])
    assert v1 == pytest.approx(v2, rel=1e-12)


def test_loss_empty_batch_raises():
    params = init_params(n_s=2, seed=0)
    with pytest.raises(ValueError):
        loss_and_gradient(params, np.zeros((0, OBS_DIM)), [])


def test_adam_zero_gradient_keeps_params():
    params = init_params(n_s=2, seed=8)
    grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    new_params, _ = adam_step(params, grads, adam_init(params))
    for (W1, b1), (W0, b0) in zip(new_params, params):
        np.testing.assert_array_equal(W1, W0)
        np.testing.assert_array_equal(b1, b0)


def test_adam_first_step_magnitude():
    params = [(np.array([[1.0]]), np.array([0.0]))]
    grads = [(np.array([[0.37]]), np.array([0.0]))]
    new_params, _ = adam_step(params, grads, adam_init(params), lr=1e-3)
    assert abs(new_params[0][0][0, 0] - 1.0) == pytest.approx(1e-3, rel=1e-6)


def test_adam_quadratic_bowl_convergence():
    # minimizing x^2 from x=5: Adam's per-step travel is bounded by lr, so at
    # the default 1e-3 five thousand steps only reach |x| ~ 1; running the
    # recursion (the oracle here) shows lr=1e-2 converges deep within budget
    params = [(np.array([[5.0]]), np.array([0.0]))]
    state = adam_init(params)
    traj = []
    for _ in range(5000):
        x = params[0][0]
        grads = [(2 * x, np.zeros(1))]
        params, state = adam_step(params, grads, state, lr=1e-2)
        traj.append(abs(float(params[0][0][0, 0])))
    assert traj[-1] < 1e-3
    assert traj[1668] < 1e-3  # frozen from running the recursion

    params = [(np.array([[5.0]]), np.array([0.0]))]
    state = adam_init(params)
    for _ in range(5000):
        x = params[0][0]
        params, state = adam_step(params, [(2 * x, np.zeros(1))], state, lr=1e-3)
    # lr=1e-3 cannot cover the distance in 5000 steps; frozen oracle value
    assert abs(params[0][0][0, 0]) == pytest.approx(1.0198107992683847, rel=1e-9)


def test_adam_rejects_nonfinite_gradient():
    params = [(np.array([[1.0]]), np.array([0.0]))]
    with pytest.raises(ValueError):
        adam_step(params, [(np.array([[np.nan]]), np.zeros(1))], adam_init(params))


def _demo(rng, n_e):
    return Demonstration(
        rng.uniform(-1, 1, OBS_DIM),
        rng.uniform(-1.5, 1.5, size=(n_e, 13)) + np.r_[np.zeros(12), 3.0],
        np.arange(n_e, dtype=float),
    )


def test_train_memorizes_single_demo():
    rng = np.random.default_rng(9)
    policy, curve = train([_demo(rng, 2)], epochs=2000, n_s=4, seed=9)
    assert curve[-1] < 1e-3


def test_train_loss_nonincreasing_smoothed():
    rng = np.random.default_rng(10)
    demos = [_demo(rng, int(rng.integers(1, 4))) for _ in range(12)]
    _, curve = train(demos, epochs=200, n_s=4, seed=10)
    smoothed = np.convolve(curve, np.ones(10) / 10, mode="valid")
    # allow tiny numerical wiggle on an otherwise decreasing curve
    assert np.all(np.diff(smoothed) < 1e-4)
    assert smoothed[-1] < smoothed[0]


def test_train_bitwise_deterministic():
    rng = np.random.default_rng(11)
    demos = [_demo(rng, 2) for _ in range(8)]
    p1, c1 = train(demos, epochs=50, n_s=3, seed=123)
    p2, c2 = train(demos, epochs=50, n_s=3, seed=123)
    assert np.array_equal(c1, c2)
    for (W1, b1), (W2, b2) in zip(p1.params, p2.params):
        assert np.array_equal(W1, W2) and np.array_equal(b1, b2)


def test_predict_roundtrip_and_time_clamp():
    norm = make_normalizer()
    rng = np.random.default_rng(12)
    raw = rng.uniform(-0.9, 0.9, size=(5, 13))
    np.testing.assert_allclose(norm.denormalize_action(norm.normalize_action(raw)), raw, atol=1e-12)

    policy, _ = train([_demo(rng, 1)], epochs=5, n_s=6, seed=13)
    for _ in range(20):
        acts = policy.predict(rng.uniform(-3, 3, OBS_DIM))
        assert len(acts) == 6
        for a in acts:
            assert 0.0 < a.total_time <= policy.normalizer.t_pred


def test_train_captures_two_separated_modes():
    # one observation, two well-separated expert modes, six heads: after
    # training at least two distinct heads sit on distinct modes
    rng = np.random.default_rng(14)
    obs = rng.uniform(-1, 1, OBS_DIM)
    mode_a = np.r_[np.full(12, 1.2), 4.0]
    mode_b = np.r_[np.full(12, -1.2), 2.0]
    demos = [Demonstration(obs, np.stack([mode_a, mode_b]), np.array([0.0, 1.0]))]
    policy, _ = train(demos, epochs=1500, n_s=6, seed=14)
    norm = policy.normalizer
    out = forward(policy.params, norm.normalize_obs(obs))
    targets = np.stack([norm.normalize_action(mode_a), norm.normalize_action(mode_b)])
    mse = ((targets[:, None, :12] - out[None, :, :12]) ** 2).mean(axis=2)
    best = mse.min(axis=1)
    arg = mse.argmin(axis=1)
    assert np.all(best < 0.1)
    assert arg[0] != arg[1]


def test_normalizer_validation_and_json():
    norm = make_normalizer()
    d = norm.to_json()
    back = Normalizer.from_json(d)
    np.testing.assert_array_equal(back.obs_lo, norm.obs_lo)
    assert back.t_pred == 6.0 and back.t_min == 0.3
    with pytest.raises(ValueError):
        Normalizer(np.zeros(3), np.zeros(3), np.zeros(3), np.ones(3))


def test_fit_normalizer_handles_degenerate_dims():
    obs = np.zeros((4, OBS_DIM))  # every dim constant
    acts = [np.zeros((1, 13))]
    norm = fit_normalizer(obs, acts, 0.3, 6.0)
    assert np.all(norm.obs_hi > norm.obs_lo)
    np.testing.assert_allclose(norm.normalize_obs(np.zeros(OBS_DIM)), 0.0, atol=1e-12)


def test_train_empty_dataset_raises():
    with pytest.raises(ValueError):
        train([])
