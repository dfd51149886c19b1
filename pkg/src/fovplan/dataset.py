"""Demonstration records, JSON-lines dataset files, and policy checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .policy import Normalizer, Policy

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Demonstration:
    """One imitation sample: a 43-real observation and n_e expert action tuples."""

    observation: np.ndarray  # (43,)
    actions: np.ndarray  # (n_e, 13)
    costs: np.ndarray  # (n_e,) ascending augmented costs

    def __post_init__(self):
        object.__setattr__(self, "observation", np.asarray(self.observation, dtype=float))
        object.__setattr__(self, "actions", np.atleast_2d(np.asarray(self.actions, dtype=float)))
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float).ravel())
        if self.actions.shape[0] != self.costs.shape[0]:
            raise ValueError("one cost per expert action required")
        if self.actions.shape[0] < 1:
            raise ValueError("a demonstration needs at least one expert action")


def save_demos_jsonl(demos, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for d in demos:
            record = {
                "observation": d.observation.tolist(),
                "actions": d.actions.tolist(),
                "costs": d.costs.tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def load_demos_jsonl(path) -> list[Demonstration]:
    demos = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            demos.append(Demonstration(rec["observation"], rec["actions"], rec["costs"]))
    return demos


def save_checkpoint(policy: Policy, path, extra: dict | None = None):
    """Versioned JSON checkpoint: {version, arch, n_s, variant, normalizer, weights}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "arch": [policy.params[0][0].shape[0]]
        + [W.shape[1] for W, _ in policy.params],
        "n_s": policy.n_s,
        "variant": policy.variant,
        "eps": policy.eps,
        "normalizer": policy.normalizer.to_json(),
        "weights": [[W.tolist(), b.tolist()] for W, b in policy.params],
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> Policy:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    params = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in payload["weights"]]
    return Policy(
        params,
        Normalizer.from_json(payload["normalizer"]),
        int(payload["n_s"]),
        payload.get("variant", "LSA"),
        float(payload.get("eps", 0.0)),
    )


def checkpoint_extra(path) -> dict:
    with open(path) as fh:
        return json.load(fh).get("extra", {})
