"""Reproduction harness: dataset generation, training, evaluation and simulation.

Every subcommand is deterministic under --seed and writes machine-readable
CSV/JSON-lines outputs whose header carries the configuration hash. Desk-scale
defaults keep runtimes small; --paper-scale restores the full experiment sizes.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import _kernels, assignment
from .costs import CostWeights, DynamicLimits
from .dataset import (
    Demonstration,
    checkpoint_extra,
    load_checkpoint,
    load_demos_jsonl,
    save_checkpoint,
    save_demos_jsonl,
)
from .expert import ExpertConfig, expert_plan
from .frames import UAVState
from .policy import Observation, forward, train
from .sim import (
    MissionConfig,
    ObstacleSpec,
    build_observation,
    dagger_collect,
    evaluate_candidates,
    expert_planner,
    run_mission,
    sample_trefoil_world,
    solutions_from_record,
    student_planner,
)

DEFAULT_CONFIG = {
    "n_s": 6,
    "n_runs": 10,
    "t_pred": 6.0,
    "t_min": 0.3,
    "s_uav": [0.25, 0.25, 0.25],
    "weights": {
        "alpha_j": 0.02,
        "alpha_psi": 0.05,
        "alpha_fov": 1.0,
        "alpha_g": 10.0,
        "alpha_T": 1.5,
        "lam": 20.0,
        "theta": float(np.pi / 2),
        "gamma": 100.0,
    },
    "limits": {"v_max": [3.0, 3.0, 3.0], "a_max": [6.0, 6.0, 6.0], "j_max": [30.0, 30.0, 30.0], "psi_dot_max": 4.0},
    "expert": {"max_iters": 300, "dedupe_threshold": 0.35, "mu_coll": 1000.0, "guess_jitter": 0.0},
    "training": {"epochs": 500, "batch_size": 64, "lr": 1e-3, "beta_p": 1.0, "beta_T": 1.0, "train_frac": 0.75},
    "static_scenario": {
        "start": [0.0, 0.0, 1.0],
        "obstacle": [2.5, 0.0, 1.0],
        # wider than tall: lateral and vertical detours are distinct local optima
        "s_obst": [0.8, 1.6, 0.8],
        "goal_x": 7.0,
        "goal_range": 1.7,
    },
    "mission": {"replan_period": 0.4, "tick": 0.05, "sphere_radius": 4.0, "goal_reach_tol": 0.5},
    "desk_scale": {"demos": 500, "dagger_episodes": 8, "dagger_iterations": 3, "dagger_duration": 10.0},
    "paper_scale": {"demos": 2000, "dagger_episodes": 60, "dagger_iterations": 5, "dagger_duration": 12.0},
}


def load_config(path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        with open(path) as fh:
            user = json.load(fh)
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def build_weights(cfg: dict) -> CostWeights:
    return CostWeights(**cfg["weights"])


def build_limits(cfg: dict) -> DynamicLimits:
    d = cfg["limits"]
    return DynamicLimits(np.asarray(d["v_max"]), np.asarray(d["a_max"]), np.asarray(d["j_max"]), d["psi_dot_max"])


def build_expert_config(cfg: dict, seed=None) -> ExpertConfig:
    return ExpertConfig(
        n_runs=cfg["n_runs"],
        n_s=cfg["n_s"],
        t_pred=cfg["t_pred"],
        t_min=cfg["t_min"],
        s_uav=np.asarray(cfg["s_uav"]),
        seed=seed,
        **cfg["expert"],
    )


def build_mission_config(cfg: dict, g_terms) -> MissionConfig:
    m = cfg["mission"]
    return MissionConfig(
        g_terms=tuple(g_terms),
        sphere_radius=m["sphere_radius"],
        replan_period=m["replan_period"],
        tick=m["tick"],
        t_pred=cfg["t_pred"],
        goal_reach_tol=m["goal_reach_tol"],
        s_uav=np.asarray(cfg["s_uav"]),
        weights=build_weights(cfg),
        limits=build_limits(cfg),
    )


def static_observation(cfg: dict, a: float, b: float) -> Observation:
    """Observation for the static-obstacle scenario: UAV parked at the start,
    yaw zero, goal at (goal_x, a, start_z + b), one static obstacle."""
    sc = cfg["static_scenario"]
    start = np.asarray(sc["start"], dtype=float)
    g_term = np.array([sc["goal_x"], a, start[2] + b])
    spec = ObstacleSpec("static", offset=np.asarray(sc["obstacle"]), s_obst=np.asarray(sc["s_obst"]))
    state = UAVState(start, np.zeros(3), np.zeros(3), 0.0, 0.0)
    mission = build_mission_config(cfg, (g_term,))
    obs, _, _ = build_observation(state, [spec], g_term, mission, t0=0.0)
    return obs


def _write_csv(path, header_comment: str, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {header_comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _file_sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def cmd_gen_demos(args) -> int:
    cfg = load_config(args.config)
    if args.ns:
        cfg["n_s"] = args.ns
    if args.nruns:
        cfg["n_runs"] = args.nruns
    scale = cfg["paper_scale"] if args.paper_scale else cfg["desk_scale"]
    count = args.count or scale["demos"]
    rng = np.random.default_rng(args.seed)
    ecfg = build_expert_config(cfg)
    w, lim = build_weights(cfg), build_limits(cfg)
    demos = []
    attempts = 0
    if args.scenario == "static":
        span = cfg["static_scenario"]["goal_range"]
        while len(demos) < count and attempts < 20 * count:
            attempts += 1
            a, b = rng.uniform(-span, span, size=2)
            obs = static_observation(cfg, a, b)
            sols = expert_plan(obs, ecfg, w, lim)
            if not sols:
                continue
            demos.append(
                Demonstration(
                    obs.to_vector(),
                    np.asarray([s.action.flatten() for s in sols]),
                    np.asarray([s.cost for s in sols]),
                )
            )
    else:  # trefoil: expert rollouts on randomized worlds
        planner = expert_planner(ecfg, w, lim)
        while len(demos) < count and attempts < 20 * count:
            attempts += 1
            spec, g_term = sample_trefoil_world(rng)
            mission = build_mission_config(cfg, (g_term,))
            log = run_mission(planner, [spec], mission, cfg["desk_scale"]["dagger_duration"], stop_at_goal=True)
            for rec in log.records:
                sols = solutions_from_record(rec)
                if sols:
                    demos.append(
                        Demonstration(
                            rec.observation,
                            np.asarray([s.action.flatten() for s in sols]),
                            np.asarray([s.cost for s in sols]),
                        )
                    )
        demos = demos[:count]
    save_demos_jsonl(demos, args.out)
    hist = Counter(d.actions.shape[0] for d in demos)
    print(f"wrote {len(demos)} demonstrations to {args.out} (config {config_hash(cfg)})")
    print("n_e histogram:", dict(sorted(hist.items())))
    return 0


def _train_split(n: int, seed: int, train_frac: float):
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(train_frac * n))
    return perm[:k], perm[k:]


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.ns:
        cfg["n_s"] = args.ns
    tr = cfg["training"]
    demos = load_demos_jsonl(args.dataset)
    train_idx, _ = _train_split(len(demos), args.seed, tr["train_frac"])
    subset = [demos[i] for i in train_idx]
    policy, curve = train(
        subset,
        variant=args.variant,
        eps=args.epsilon,
        epochs=args.epochs or tr["epochs"],
        batch_size=tr["batch_size"],
        seed=args.seed,
        lr=tr["lr"],
        n_s=cfg["n_s"],
        t_min=cfg["t_min"],
        t_pred=cfg["t_pred"],
        beta_p=tr["beta_p"],
        beta_T=tr["beta_T"],
    )
    extra = {
        "dataset": str(args.dataset),
        "dataset_sha": _file_sha(args.dataset),
        "split_seed": args.seed,
        "train_frac": tr["train_frac"],
        "config_hash": config_hash(cfg),
    }
    save_checkpoint(policy, args.out, extra=extra)
    curve_path = Path(args.out).with_suffix(".loss.csv")
    _write_csv(
        curve_path,
        f"config={config_hash(cfg)} seed={args.seed} variant={args.variant} eps={args.epsilon}",
        ["epoch", "loss"],
        [(i, float(v)) for i, v in enumerate(curve)],
    )
    print(f"trained {args.variant}-{args.epsilon} on {len(subset)} demos; final loss {curve[-1]:.6f}")
    print(f"checkpoint: {args.out}; loss curve: {curve_path}")
    return 0


def mse_by_kappa(policy, demos) -> dict[int, list]:
    """Per-demo optimal assignment, pairs ranked by position MSE, bucketed by rank."""
    buckets: dict[int, list] = {}
    norm = policy.normalizer
    for demo in demos:
        e_norm = np.atleast_2d(norm.normalize_action(demo.actions))
        s_norm = forward(policy.params, norm.normalize_obs(demo.observation))
        cm = assignment.cost_matrices(e_norm, s_norm)
        A = assignment.lsa_assign(cm)
        cols = np.argmax(A.A, axis=1)
        pair_mse = sorted(cm.D_p[np.arange(len(cols)), cols])
        for kappa, value in enumerate(pair_mse):
            buckets.setdefault(kappa, []).append(float(value))
    return buckets


def cmd_eval_mse(args) -> int:
    cfg = load_config(args.config)
    demos = load_demos_jsonl(args.dataset)
    rows = []
    stats = {}
    for path in args.checkpoints:
        policy = load_checkpoint(path)
        extra = checkpoint_extra(path)
        if extra.get("dataset_sha") and extra["dataset_sha"] != _file_sha(args.dataset):
            print(f"warning: {path} was trained on a different dataset", file=sys.stderr)
        _, eval_idx = _train_split(len(demos), extra.get("split_seed", args.seed), extra.get("train_frac", 0.75))
        buckets = mse_by_kappa(policy, [demos[i] for i in eval_idx])
        key = (policy.variant, policy.eps)
        stats[key] = {k: float(np.mean(v)) for k, v in buckets.items()}
        for kappa in sorted(buckets):
            rows.append((Path(path).name, policy.variant, policy.eps, kappa, len(buckets[kappa]), np.mean(buckets[kappa])))
    lsa = stats.get(("LSA", 0.0))
    if lsa:
        for key, means in stats.items():
            if key == ("LSA", 0.0):
                continue
            for kappa, m in sorted(means.items()):
                if kappa in lsa and lsa[kappa] > 0:
                    rows.append((f"ratio_{key[0]}-{key[1]}", key[0], key[1], kappa, 0, m / lsa[kappa]))
    _write_csv(
        args.out,
        f"config={config_hash(cfg)} dataset={args.dataset}",
        ["checkpoint", "variant", "eps", "kappa", "count", "mean_mse_or_ratio"],
        rows,
    )
    print(f"wrote per-kappa MSE table to {args.out}")
    return 0


def static_grid_rows(cfg: dict, planner, grid: int = 8):
    """One row per grid goal: counts, best collision-free cost, planner latency."""
    span = cfg["static_scenario"]["goal_range"]
    vals = np.linspace(-span, span, grid)
    w, lim = build_weights(cfg), build_limits(cfg)
    s_uav = np.asarray(cfg["s_uav"])
    rows = []
    for i_y, a in enumerate(vals):
        for i_z, b in enumerate(vals):
            obs = static_observation(cfg, float(a), float(b))
            t0 = time.perf_counter()
            actions, _ = planner(obs)
            latency = time.perf_counter() - t0
            ranked = evaluate_candidates(obs, actions, w, lim, s_uav, cfg["t_pred"])
            free = [c for ok, c in ranked if ok]
            rows.append(
                (
                    i_y,
                    i_z,
                    float(a),
                    float(b),
                    len(ranked),
                    len(free),
                    min(free) if free else "",
                    latency,
                )
            )
    return rows


def cmd_eval_static_grid(args) -> int:
    cfg = load_config(args.config)
    if args.expert:
        planner = expert_planner(build_expert_config(cfg, seed=args.seed), build_weights(cfg), build_limits(cfg))
        label = "expert"
    else:
        planner = student_planner(load_checkpoint(args.checkpoint))
        label = Path(args.checkpoint).name
    rows = static_grid_rows(cfg, planner, grid=8)
    _write_csv(
        args.out,
        f"config={config_hash(cfg)} planner={label} seed={args.seed}",
        ["i_y", "i_z", "a", "b", "n_candidates", "n_collision_free", "best_cost", "latency_s"],
        rows,
    )
    n_ok = sum(1 for r in rows if r[5] >= 1)
    print(f"{label}: {n_ok}/64 goals with at least one collision-free trajectory -> {args.out}")
    return 0


def build_world(kind: str, n_obstacles: int, rng: np.random.Generator, cfg: dict):
    """Obstacle set and goal list for the replanning experiments."""
    if n_obstacles > 1:
        # corridor flight x: 0 -> 15 m with several epitrochoid obstacles
        specs = []
        for _ in range(n_obstacles):
            specs.append(
                ObstacleSpec(
                    kind="epitrochoid",
                    offset=np.array([rng.uniform(3.0, 12.0), rng.uniform(-1.0, 1.0), rng.uniform(0.8, 1.6)]),
                    scale=rng.uniform(0.8, 1.5, size=3),
                    phase=rng.uniform(0, 2 * np.pi),
                    period=rng.uniform(8.0, 14.0),
                )
            )
        return specs, (np.array([15.0, 0.0, 1.0]),)
    # back-and-forth between two goals 10 m apart, obstacle in between
    offset = np.array([5.0 + rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.2])
    spec = ObstacleSpec(
        kind=kind,
        offset=offset,
        scale=np.array([1.2, 1.2, 1.0]),
        phase=rng.uniform(0, 2 * np.pi),
        period=10.0,
    )
    return [spec], (np.array([10.0, 0.0, 1.0]), np.array([0.0, 0.0, 1.0]))


def cmd_sim(args) -> int:
    cfg = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    specs, g_terms = build_world(args.world, args.n_obstacles, rng, cfg)
    mission = build_mission_config(cfg, g_terms)
    if args.expert:
        planner = expert_planner(build_expert_config(cfg, seed=args.seed), mission.weights, mission.limits)
    else:
        planner = student_planner(load_checkpoint(args.checkpoint))
    log = run_mission(planner, specs, mission, args.duration)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for rec in log.records:
            fh.write(json.dumps(rec.to_json()) + "\n")
    _write_csv(
        out.with_suffix(".executed.csv"),
        f"config={config_hash(cfg)} world={args.world} n_obstacles={args.n_obstacles} seed={args.seed}",
        ["t", "x", "y", "z", "psi"],
        [(t, p[0], p[1], p[2], psi) for t, p, psi in log.executed],
    )
    summary = log.summary()
    summary["config_hash"] = config_hash(cfg)
    summary["world"] = args.world
    summary["n_obstacles"] = args.n_obstacles
    summary["seed"] = args.seed
    with open(out.with_suffix(".summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_dagger(args) -> int:
    cfg = load_config(args.config)
    scale = cfg["paper_scale"] if args.paper_scale else cfg["desk_scale"]
    ecfg = build_expert_config(cfg)
    demos, policy, history = dagger_collect(
        ecfg,
        build_weights(cfg),
        build_limits(cfg),
        iterations=args.iterations or scale["dagger_iterations"],
        episodes_per_iter=args.episodes or scale["dagger_episodes"],
        episode_duration=scale["dagger_duration"],
        seed=args.seed,
        train_kwargs={
            "variant": args.variant,
            "eps": args.epsilon,
            "epochs": args.epochs or cfg["training"]["epochs"],
            "batch_size": cfg["training"]["batch_size"],
            "lr": cfg["training"]["lr"],
            "beta_p": cfg["training"]["beta_p"],
            "beta_T": cfg["training"]["beta_T"],
        },
    )
    save_checkpoint(policy, args.out, extra={"config_hash": config_hash(cfg), "dagger": history})
    if args.dataset_out:
        save_demos_jsonl(demos, args.dataset_out)
    print(f"DAgger finished: {len(demos)} pairs; history: {history}")
    print(f"checkpoint: {args.out}")
    return 0


def _selftest_checks(seed: int = 0):
    """DERIVED-value oracles, each independent of the implementation it checks."""
    from .selftest import all_checks

    return all_checks(seed)


def cmd_selftest(args) -> int:
    failures = 0
    for name, ok, detail in _selftest_checks(args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        failures += 0 if ok else 1
    print(f"kernel backend: {_kernels.backend_name()}")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fovplan", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config file (defaults merged in)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="collect (observation, expert actions) pairs")
    p.add_argument("--scenario", choices=["static", "trefoil"], default="static")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ns", type=int, default=None)
    p.add_argument("--nruns", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("train", help="train a policy on a demonstration dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", choices=list(assignment.VARIANTS), default="LSA")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ns", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-mse", help="per-rank MSE of policies vs the expert")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_mse)

    p = sub.add_parser("eval-static-grid", help="8x8 goal grid: collision-free counts, cost, latency")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--expert", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_static_grid)

    p = sub.add_parser("sim", help="replanning mission in a dynamic world")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--expert", action="store_true")
    p.add_argument("--world", choices=["static", "trefoil", "square", "eight", "epitrochoid"], default="trefoil")
    p.add_argument("--n-obstacles", type=int, default=1)
    p.add_argument("--duration", type=float, default=45.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("dagger", help="DAgger on randomized trefoil worlds")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--variant", choices=list(assignment.VARIANTS), default="LSA")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset-out", default=None)
    p.set_defaults(func=cmd_dagger)

    p = sub.add_parser("selftest", help="run the independent numeric oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    if args.command == "eval-static-grid" and not args.expert and not args.checkpoint:
        parser.error("eval-static-grid needs --checkpoint or --expert")
    if args.command == "sim" and not args.expert and not args.checkpoint:
        parser.error("sim needs --checkpoint or --expert")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
