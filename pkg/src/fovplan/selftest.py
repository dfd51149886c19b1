"""Independent numeric oracles for the core algorithms.

Each check recomputes an expected result by a route independent of the
implementation under test (exhaustive enumeration, dense sampling, finite
differences) and is runnable from the CLI (`fovplan selftest`).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import _kernels, assignment
from .costs import BoxPair, CostWeights, DynamicLimits, augmented_cost, collision_penetration
from .frames import GRAVITY
from .policy import init_params, loss_and_gradient
from .splines import OBST_SPACE, POS_SPACE, ActionTuple, Spline, impose_boundary_conditions
from .yaw import b1_closed_form, psi_profile


def enumerate_lsa(D: np.ndarray):
    """Brute-force optimal assignment: lexicographically-first argmin over all
    injective row-to-column maps; costs compared via exactly-rounded sums."""
    n_e, n_s = D.shape
    best_cost, best_cols = None, None
    for cols in itertools.permutations(range(n_s), n_e):
        cost = math.fsum(D[i, c] for i, c in enumerate(cols))
        if best_cost is None or cost < best_cost:
            best_cost, best_cols = cost, cols
    return best_cost, np.asarray(best_cols)


def check_lsa_vs_enumeration(seed: int):
    rng = np.random.default_rng(seed)
    for trial in range(60):
        n_s = int(rng.integers(1, 7))
        n_e = int(rng.integers(1, n_s + 1))
        if trial % 3 == 2:
            D = rng.integers(0, 4, size=(n_e, n_s)).astype(float)  # exact ties
        else:
            D = rng.uniform(0.0, 5.0, size=(n_e, n_s))
        cm = assignment.CostMatrices(D, np.zeros_like(D))
        A = assignment.lsa_assign(cm)
        cols = np.argmax(A.A, axis=1)
        cost = math.fsum(D[i, c] for i, c in enumerate(cols))
        ref_cost, ref_cols = enumerate_lsa(D)
        if cost != ref_cost:
            return False, f"cost {cost} != enumeration {ref_cost} (trial {trial})"
        if not np.array_equal(cols, ref_cols):
            return False, f"tie-break mismatch: {cols} vs {ref_cols} (trial {trial})"
    return True, "60 matrices, exact cost and canonical tie-break"


def check_yaw_vs_circle(seed: int, n_cases: int = 50, n_dirs: int = 20000):
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(n_cases):
        r = rng.normal(size=3) * rng.uniform(0.5, 5.0)
        xi = rng.normal(size=3) * rng.uniform(0.5, 20.0)
        while np.linalg.norm(xi) < 1e-3:
            xi = rng.normal(size=3)
        b1 = b1_closed_form(r, xi)
        r_hat = r / np.linalg.norm(r)
        # dense sweep of the unit circle perpendicular to xi
        u = b1_closed_form(rng.normal(size=3), xi)
        v = np.cross(xi / np.linalg.norm(xi), u)
        ang = np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False)
        dirs = np.outer(np.cos(ang), u) + np.outer(np.sin(ang), v)
        brute = float(np.max(dirs @ r_hat))
        worst = min(worst, float(b1 @ r_hat) - brute)
        if float(b1 @ r_hat) < brute - 1e-4:
            return False, f"closed form {b1 @ r_hat:.6f} < brute force {brute:.6f}"
    return True, f"{n_cases} cases, min margin over brute force {worst:.2e}"


def check_boundary_conditions(seed: int, n_cases: int = 200):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        d, v, a = rng.normal(size=3), 3 * rng.normal(size=3), 5 * rng.normal(size=3)
        action = ActionTuple(5 * rng.normal(size=(4, 3)), rng.uniform(0.3, 6.0))
        s = impose_boundary_conditions(action, d, v, a)
        checks = [
            (s.eval(s.t_start, 0), d),
            (s.eval(s.t_start, 1), v),
            (s.eval(s.t_start, 2), a),
            (s.eval(s.t_end, 1), np.zeros(3)),
            (s.eval(s.t_end, 2), np.zeros(3)),
        ]
        for got, want in checks:
            err = np.max(np.abs(got - want)) / (1.0 + np.linalg.norm(want))
            worst = max(worst, float(err))
    return worst < 1e-9, f"{n_cases} cases, worst endpoint error {worst:.2e}"


def check_gradient_fd(seed: int, n_coords: int = 50):
    rng = np.random.default_rng(seed)
    params = init_params(n_s=3, seed=seed, hidden=(8, 8))
    obs = rng.uniform(-1, 1, size=(4, 43))
    experts = [rng.uniform(-1, 1, size=(int(rng.integers(1, 4)), 13)) for _ in range(4)]
    worst = 0.0
    for variant, eps in (("LSA", 0.0), ("RWTAr", 0.05), ("RWTAc", 0.05)):
        _, grads = loss_and_gradient(params, obs, experts, variant, eps)
        for _ in range(n_coords):
            layer = int(rng.integers(len(params)))
            which = int(rng.integers(2))
            arr = params[layer][which]
            idx = tuple(int(rng.integers(s)) for s in arr.shape)
            h = 1e-5

            def value(delta):
                trial = [(W.copy(), b.copy()) for W, b in params]
                trial[layer][which][idx] += delta
                v, _ = loss_and_gradient(trial, obs, experts, variant, eps)
                return v

            fd = (value(h) - value(-h)) / (2 * h)
            an = grads[layer][which][idx]
            rel = abs(an - fd) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
            if rel > 1e-4:
                return False, f"{variant}: grad {an:.3e} vs fd {fd:.3e} rel {rel:.1e}"
    return True, f"3 loss variants x {n_coords} coords, worst rel err {worst:.1e}"


def check_kernel_equivalence(seed: int):
    rng = np.random.default_rng(seed)
    w, lim = CostWeights(), DynamicLimits()
    v_in, a_in = rng.normal(size=3), rng.normal(size=3)
    goal = np.array([4.0, 0.5, 0.2])
    obst = Spline(OBST_SPACE, 0.0, 6.0, np.array([2.5, 0, 0]) + 0.5 * rng.normal(size=(10, 3)))
    boxes = BoxPair(np.array([0.8, 0.8, 0.8]))
    ctx = _kernels.make_context(v_in, a_in, goal, obst, boxes.rho, w, lim, 1e3, GRAVITY)
    X = np.column_stack([2 * rng.normal(size=(20, 12)), rng.uniform(0.4, 6.0, size=20)])
    numpy_vals = _kernels.evaluate_batch(ctx, X, backend="numpy")
    ref = []
    for x in X:
        action = ActionTuple.from_flat(x)
        pos = impose_boundary_conditions(action, np.zeros(3), v_in, a_in)
        psi = psi_profile(pos, obst)
        ref.append(
            augmented_cost(pos, psi, obst, goal, w, lim) + 1e3 * collision_penetration(pos, obst, boxes)
        )
    err = float(np.max(np.abs(numpy_vals - ref) / (1.0 + np.abs(ref))))
    detail = f"numpy vs reference {err:.2e}"
    ok = err < 1e-9
    if _kernels.backend_name() == "compiled":
        compiled_vals = _kernels.evaluate_batch(ctx, X, backend="compiled")
        err_c = float(np.max(np.abs(compiled_vals - numpy_vals) / (1.0 + np.abs(numpy_vals))))
        ok = ok and err_c < 1e-9
        detail += f", compiled vs numpy {err_c:.2e}"
    return ok, detail


def check_derivative_fd(seed: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        s = Spline(POS_SPACE, 0.0, rng.uniform(1.0, 8.0), 3 * rng.normal(size=(9, 3)))
        ts = rng.uniform(s.t_start + 1e-3, s.t_end - 1e-3, size=25)
        fd = (s.eval(ts + 1e-6, 0) - s.eval(ts - 1e-6, 0)) / 2e-6
        err = np.max(np.abs(s.derivative().eval(ts, 0) - fd)) / (1.0 + np.max(np.abs(fd)))
        worst = max(worst, float(err))
    return worst < 1e-5, f"derivative spline vs finite differences, worst rel {worst:.1e}"


def all_checks(seed: int = 0):
    checks = [
        ("lsa_vs_enumeration", check_lsa_vs_enumeration),
        ("yaw_vs_circle_bruteforce", check_yaw_vs_circle),
        ("boundary_conditions_endpoints", check_boundary_conditions),
        ("gradient_vs_finite_differences", check_gradient_fd),
        ("kernel_vs_reference_costs", check_kernel_equivalence),
        ("derivative_vs_finite_differences", check_derivative_fd),
    ]
    return [(name, *fn(seed)) for name, fn in checks]
