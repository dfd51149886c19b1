"""The learned planner: observation encoding, normalization, MLP, assignment-loss training.

A fully connected 43 -> 64 -> 64 -> 13*n_s network with ReLU hidden layers and
a linear output maps the normalized observation to n_s normalized action
tuples. Training minimizes the assignment-weighted MSE against the expert's
action set with Adam; the assignment matrix is recomputed every forward pass
and treated as constant by the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import assign, cost_matrices, loss as assignment_loss
from .splines import ActionTuple

OBS_DIM = 43
ACTION_DIM = 13
HIDDEN = (64, 64)


@dataclass(frozen=True)
class Observation:
    """Policy input, all quantities expressed in frame f.

    Flattens to 43 reals in the fixed order (v_f, a_f, g_f, psi_dot,
    q_obst_f, s_obst).
    """

    v_f: np.ndarray  # (3,)
    a_f: np.ndarray  # (3,)
    g_f: np.ndarray  # (3,)
    psi_dot: float
    q_obst_f: np.ndarray  # (10, 3) obstacle spline control points
    s_obst: np.ndarray  # (3,)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.asarray(self.v_f, dtype=float),
                np.asarray(self.a_f, dtype=float),
                np.asarray(self.g_f, dtype=float),
                [float(self.psi_dot)],
                np.asarray(self.q_obst_f, dtype=float).reshape(30),
                np.asarray(self.s_obst, dtype=float),
            ]
        )

    @staticmethod
    def from_vector(x: np.ndarray) -> "Observation":
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (OBS_DIM,):
            raise ValueError(f"observation flattens to {OBS_DIM} reals, got {x.shape}")
        return Observation(x[0:3], x[3:6], x[6:9], float(x[9]), x[10:40].reshape(10, 3), x[40:43])


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension min-max maps onto [-1, 1].

    Observation bounds are data-driven with margin padding; action position
    bounds likewise, while the total-time scalar is pinned to [t_min, t_pred]
    so denormalized times always land in (0, t_pred].
    """

    obs_lo: np.ndarray
    obs_hi: np.ndarray
    act_lo: np.ndarray
    act_hi: np.ndarray

    def __post_init__(self):
        for name in ("obs_lo", "obs_hi", "act_lo", "act_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (np.all(self.obs_hi > self.obs_lo) and np.all(self.act_hi > self.act_lo)):
            raise ValueError("normalizer needs max > min on every dimension")

    @property
    def t_min(self) -> float:
        return float(self.act_lo[12])

    @property
    def t_pred(self) -> float:
        return float(self.act_hi[12])

    def normalize_obs(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.obs_lo) / (self.obs_hi - self.obs_lo) - 1.0

    def normalize_action(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.act_lo) / (self.act_hi - self.act_lo) - 1.0

    def denormalize_action(self, x):
        x = np.asarray(x, dtype=float)
        return (x + 1.0) / 2.0 * (self.act_hi - self.act_lo) + self.act_lo

    def to_json(self) -> dict:
        return {
            "obs_lo": self.obs_lo.tolist(),
            "obs_hi": self.obs_hi.tolist(),
            "act_lo": self.act_lo.tolist(),
            "act_hi": self.act_hi.tolist(),
        }

    @staticmethod
    def from_json(d: dict) -> "Normalizer":
        return Normalizer(d["obs_lo"], d["obs_hi"], d["act_lo"], d["act_hi"])


def fit_normalizer(obs: np.ndarray, actions, t_min: float, t_pred: float, margin: float = 0.05) -> Normalizer:
    """Bounds from the training split only; 5% span padding, degenerate dims widened."""

    def padded(lo, hi):
        span = hi - lo
        pad = np.where(span > 1e-9, margin * span, 0.5)
        return lo - pad, hi + pad

    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    obs_lo, obs_hi = padded(obs.min(axis=0), obs.max(axis=0))
    pooled = np.concatenate([np.atleast_2d(a) for a in actions], axis=0)
    act_lo, act_hi = padded(pooled.min(axis=0), pooled.max(axis=0))
    act_lo[12], act_hi[12] = t_min, t_pred
    return Normalizer(obs_lo, obs_hi, act_lo, act_hi)


def init_params(n_s: int, seed: int, hidden=HIDDEN):
    """Uniform fan-in initialization of all layer weights and biases."""
    rng = np.random.default_rng(seed)
    sizes = [OBS_DIM, *hidden, ACTION_DIM * n_s]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        params.append((W, b))
    return params


def _forward_cached(params, X: np.ndarray):
    acts = [X]
    z = X
    for k, (W, b) in enumerate(params):
        z = acts[-1] @ W + b
        if k < len(params) - 1:
            z = np.maximum(z, 0.0)
        acts.append(z)
    return acts


def forward(params, obs_norm: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; returns the (n_s, 13) normalized action block."""
    obs_norm = np.asarray(obs_norm, dtype=float)
    if not np.all(np.isfinite(obs_norm)):
        raise ValueError("non-finite observation")
    out = _forward_cached(params, obs_norm.reshape(1, -1))[-1][0]
    return out.reshape(-1, ACTION_DIM)


def _backward(params, acts, d_out: np.ndarray):
    grads = [None] * len(params)
    delta = d_out
    for k in range(len(params) - 1, -1, -1):
        W, _ = params[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            delta = (delta @ W.T) * (acts[k] > 0.0)
    return grads


def loss_and_gradient(
    params,
    obs_batch: np.ndarray,
    expert_batch,
    variant: str = "LSA",
    eps: float = 0.0,
    beta_p: float = 1.0,
    beta_T: float = 1.0,
):
    """Mean assignment loss over the batch and its gradient w.r.t. all parameters.

    expert_batch is a list of (n_e, 13) normalized expert action arrays; the
    assignment matrix is recomputed per sample and no gradient flows through it.
    """
    B = len(expert_batch)
    if B == 0:
        raise ValueError("empty batch")
    X = np.atleast_2d(np.asarray(obs_batch, dtype=float))
    acts = _forward_cached(params, X)
    out = acts[-1]
    n_s = out.shape[1] // ACTION_DIM
    S = out.reshape(B, n_s, ACTION_DIM)
    d_S = np.zeros_like(S)
    total = 0.0
    for b in range(B):
        e = np.atleast_2d(expert_batch[b])
        cm = cost_matrices(e, S[b])
        A = assign(cm, variant, eps, canonical_ties=False)
        value, g_p, g_T = assignment_loss(A, cm, beta_p, beta_T)
        total += value
        diff_p = S[b][None, :, :12] - e[:, None, :12]
        d_S[b, :, :12] += np.einsum("ij,ijk->jk", g_p, diff_p) * (2.0 / 12.0)
        diff_T = S[b][None, :, 12] - e[:, None, 12]
        d_S[b, :, 12] += np.einsum("ij,ij->j", g_T, diff_T) * 2.0
    grads = _backward(params, acts, d_S.reshape(B, -1) / B)
    return total / B, grads


def adam_init(params):
    return {
        "m": [(np.zeros_like(W), np.zeros_like(b)) for W, b in params],
        "v": [(np.zeros_like(W), np.zeros_like(b)) for W, b in params],
        "t": 0,
    }


def adam_step(params, grads, state, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update; returns (new_params, new_state)."""
    for gW, gb in grads:
        if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gb))):
            raise ValueError("non-finite gradient")
    t = state["t"] + 1
    corr1 = 1.0 - beta1**t
    corr2 = 1.0 - beta2**t
    new_params, new_m, new_v = [], [], []
    for (W, b), (gW, gb), (mW, mb), (vW, vb) in zip(params, grads, state["m"], state["v"]):
        mW = beta1 * mW + (1 - beta1) * gW
        mb = beta1 * mb + (1 - beta1) * gb
        vW = beta2 * vW + (1 - beta2) * gW**2
        vb = beta2 * vb + (1 - beta2) * gb**2
        W = W - lr * (mW / corr1) / (np.sqrt(vW / corr2) + eps)
        b = b - lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
        new_params.append((W, b))
        new_m.append((mW, mb))
        new_v.append((vW, vb))
    return new_params, {"m": new_m, "v": new_v, "t": t}


@dataclass
class Policy:
    """Trained network plus the normalizer it was fitted with."""

    params: list
    normalizer: Normalizer
    n_s: int
    variant: str = "LSA"
    eps: float = 0.0

    def predict(self, obs) -> list[ActionTuple]:
        """Denormalized action tuples; total time clamped into (0, t_pred]."""
        vec = obs.to_vector() if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
        out = forward(self.params, self.normalizer.normalize_obs(vec))
        raw = self.normalizer.denormalize_action(out)
        raw[:, 12] = np.clip(raw[:, 12], self.normalizer.t_min, self.normalizer.t_pred)
        return [ActionTuple.from_flat(row) for row in raw]


def train(
    demos,
    variant: str = "LSA",
    eps: float = 0.0,
    epochs: int = 500,
    batch_size: int = 64,
    seed: int = 0,
    lr: float = 1e-3,
    n_s: int = 6,
    t_min: float = 0.3,
    t_pred: float = 6.0,
    beta_p: float = 1.0,
    beta_T: float = 1.0,
    normalizer: Normalizer | None = None,
):
    """Train a policy on (observation, expert actions) demonstrations.

    Deterministic for a fixed seed: weight init, shuffling and batching all
    derive from it. Returns (Policy, per-epoch mean loss array).
    """
    if len(demos) == 0:
        raise ValueError("empty dataset")
    obs = np.asarray([d.observation for d in demos], dtype=float)
    if normalizer is None:
        normalizer = fit_normalizer(obs, [d.actions for d in demos], t_min, t_pred)
    X = np.asarray([normalizer.normalize_obs(o) for o in obs])
    E = [np.atleast_2d(normalizer.normalize_action(d.actions)) for d in demos]
    params = init_params(n_s, seed)
    state = adam_init(params)
    rng = np.random.default_rng(seed + 1)
    curve = np.empty(epochs)
    n = len(demos)
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            value, grads = loss_and_gradient(
                params, X[idx], [E[i] for i in idx], variant, eps, beta_p, beta_T
            )
            params, state = adam_step(params, grads, state, lr)
            epoch_loss += value * len(idx)
        curve[epoch] = epoch_loss / n
    return Policy(params, normalizer, n_s, variant, eps), curve
