"""Benchmark the compiled objective kernel against the pure-numpy fallback.

Builds a representative planning scenario, checks both backends agree to
float roundoff, then times batch objective evaluation and a full expert plan
on each backend.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from fovplan import _kernels
from fovplan.costs import BoxPair, CostWeights, DynamicLimits
from fovplan.expert import ExpertConfig, expert_plan
from fovplan.frames import GRAVITY
from fovplan.policy import Observation
from fovplan.splines import OBST_SPACE, Spline


def scenario(rng):
    w, lim = CostWeights(), DynamicLimits()
    v_in = np.array([0.8, -0.3, 0.1])
    a_in = np.array([0.4, 0.2, -0.2])
    goal = np.array([4.0, 0.4, 0.1])
    cps = np.linspace([2.5, -1.2, 0.0], [2.5, 1.2, 0.4], 10) + 0.1 * rng.normal(size=(10, 3))
    obst = Spline(OBST_SPACE, 0.0, 6.0, cps)
    boxes = BoxPair(np.array([0.8, 0.8, 0.8]))
    ctx = _kernels.make_context(v_in, a_in, goal, obst, boxes.rho, w, lim, 1e3, GRAVITY)
    obs = Observation(v_in, a_in, goal, 0.0, cps, boxes.s_obst)
    return ctx, obs, w, lim


def time_batches(ctx, X, backend, repeats=200):
    _kernels.evaluate_batch(ctx, X, backend=backend)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        _kernels.evaluate_batch(ctx, X, backend=backend)
    return (time.perf_counter() - t0) / repeats / X.shape[0]


def time_expert(obs, backend, repeats=3):
    import fovplan._kernels as kernels

    saved = kernels.BACKEND
    kernels.BACKEND = backend
    try:
        cfg = ExpertConfig()
        w, lim = CostWeights(), DynamicLimits()
        expert_plan(obs, cfg, w, lim)  # warm up
        t0 = time.perf_counter()
        for _ in range(repeats):
            expert_plan(obs, cfg, w, lim)
        return (time.perf_counter() - t0) / repeats
    finally:
        kernels.BACKEND = saved


def main():
    rng = np.random.default_rng(0)
    ctx, obs, w, lim = scenario(rng)
    backends = ["numpy"]
    if _kernels.backend_name() == "compiled":
        backends.insert(0, "compiled")
    else:
        print("compiled extension not available; benchmarking numpy only")

    X = np.column_stack([2 * rng.normal(size=(64, 12)), rng.uniform(0.4, 6.0, 64)])
    values = {b: _kernels.evaluate_batch(ctx, X, backend=b) for b in backends}
    if len(backends) == 2:
        err = np.max(np.abs(values["compiled"] - values["numpy"]) / (1 + np.abs(values["numpy"])))
        print(f"backend agreement (max rel err over 64 candidates): {err:.2e}")
        assert err < 1e-9

    print(f"\n{'backend':<10} {'us/candidate (B=64)':>22} {'us/candidate (B=14)':>22} {'expert_plan s':>15}")
    X14 = np.ascontiguousarray(X[:14])
    for b in backends:
        t64 = time_batches(ctx, X, b) * 1e6
        t14 = time_batches(ctx, X14, b) * 1e6
        te = time_expert(obs, b)
        print(f"{b:<10} {t64:>22.2f} {t14:>22.2f} {te:>15.3f}")
    if len(backends) == 2:
        speedup = time_batches(ctx, X14, "numpy") / time_batches(ctx, X14, "compiled")
        print(f"\ncompiled speedup at the optimizer's batch size: {speedup:.1f}x")


if __name__ == "__main__":
    main()
