import json
from pathlib import Path

import numpy as np
import pytest

from fovplan import assignment, cli
from fovplan.dataset import load_checkpoint, load_demos_jsonl
from fovplan.policy import forward

DESK_TEST_CONFIG = {
    "n_runs": 6,
    "expert": {"max_iters": 100, "dedupe_threshold": 0.35, "mu_coll": 1000.0, "guess_jitter": 0.0},
    "training": {"epochs": 40, "batch_size": 16, "lr": 1e-3, "beta_p": 1.0, "beta_T": 1.0, "train_frac": 0.75},
}


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(DESK_TEST_CONFIG))
    return str(path)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory, config_path):
    out = tmp_path_factory.mktemp("data") / "demos.jsonl"
    rc = cli.main(["--config", config_path, "gen-demos", "--count", "24", "--seed", "1", "--out", str(out)])
    assert rc == 0
    return str(out)


@pytest.fixture(scope="module")
def lsa_checkpoint(tmp_path_factory, config_path, small_dataset):
    out = tmp_path_factory.mktemp("ckpt") / "lsa.json"
    rc = cli.main(
        ["--config", config_path, "train", "--dataset", small_dataset, "--variant", "LSA",
         "--seed", "0", "--out", str(out)]
    )
    assert rc == 0
    return str(out)


def test_gen_demos_count_and_determinism(tmp_path, config_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    for out in (a, b):
        rc = cli.main(["--config", config_path, "gen-demos", "--count", "10", "--seed", "7", "--out", str(out)])
        assert rc == 0
    demos = load_demos_jsonl(a)
    assert len(demos) == 10
    assert a.read_bytes() == b.read_bytes()


def test_gen_demos_goals_in_range(small_dataset):
    for d in load_demos_jsonl(small_dataset):
        g_f = d.observation[6:9]
        assert 0 < np.linalg.norm(g_f) <= 4.0 + 1e-9  # projected onto the sphere
        assert d.actions.shape[1] == 13


def test_train_writes_checkpoint_and_curve(lsa_checkpoint):
    policy = load_checkpoint(lsa_checkpoint)
    assert policy.n_s == 6 and policy.variant == "LSA"
    curve_path = Path(lsa_checkpoint).with_suffix(".loss.csv")
    lines = curve_path.read_text().strip().splitlines()
    assert lines[0].startswith("#") and "config=" in lines[0]
    assert lines[1] == "epoch,loss"
    assert len(lines) == 2 + DESK_TEST_CONFIG["training"]["epochs"]


def test_wtar_equals_rwtar_at_eps_zero(tmp_path, config_path, small_dataset):
    outs = []
    for variant in ("WTAr", "RWTAr"):
        out = tmp_path / f"{variant}.json"
        rc = cli.main(
            ["--config", config_path, "train", "--dataset", small_dataset, "--variant", variant,
             "--epsilon", "0.0", "--seed", "3", "--epochs", "5", "--out", str(out)]
        )
        assert rc == 0
        outs.append(out)
    curves = [np.loadtxt(o.with_suffix(".loss.csv"), delimiter=",", skiprows=2) for o in outs]
    np.testing.assert_array_equal(curves[0], curves[1])


def test_eval_mse_table(tmp_path, config_path, small_dataset, lsa_checkpoint):
    out = tmp_path / "mse.csv"
    rc = cli.main(
        ["--config", config_path, "eval-mse", "--dataset", small_dataset,
         "--checkpoints", lsa_checkpoint, "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[1].split(",")[0] == "checkpoint"
    rows = [line.split(",") for line in lines[2:]]
    kappas = [int(r[3]) for r in rows]
    assert all(0 <= k <= 5 for k in kappas)


def test_eval_static_grid_student(tmp_path, config_path, lsa_checkpoint):
    out = tmp_path / "grid.csv"
    rc = cli.main(
        ["--config", config_path, "eval-static-grid", "--checkpoint", lsa_checkpoint, "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2 + 64
    header = lines[1].split(",")
    assert header[:4] == ["i_y", "i_z", "a", "b"]
    idx = [(int(r.split(",")[0]), int(r.split(",")[1])) for r in lines[2:]]
    assert set(idx) == {(i, j) for i in range(8) for j in range(8)}


def test_sim_smoke_and_summary(tmp_path, config_path):
    out = tmp_path / "mission.jsonl"
    rc = cli.main(
        ["--config", config_path, "sim", "--expert", "--world", "static", "--duration", "2.0",
         "--seed", "0", "--out", str(out)]
    )
    assert rc == 0
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert summary["pct_zero"] + summary["pct_1_3"] + summary["pct_4_6"] == pytest.approx(100.0)
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == summary["replans"]
    assert out.with_suffix(".executed.csv").exists()


def test_selftest_passes():
    assert cli.main(["selftest", "--seed", "2"]) == 0


def test_selftest_catches_corrupted_lsa_tiebreak(monkeypatch, capsys):
    # corrupt the tie-break to prefer the highest column: the enumeration
    # oracle in the selftest must flag it
    original = assignment._canonical_lsa_columns

    def corrupted(D):
        flipped = original(np.ascontiguousarray(D[:, ::-1]))
        return D.shape[1] - 1 - flipped

    monkeypatch.setattr(assignment, "_canonical_lsa_columns", corrupted)
    rc = cli.main(["selftest", "--seed", "2"])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL  lsa_vs_enumeration" in out


def test_config_hash_stable():
    cfg = cli.load_config()
    assert cli.config_hash(cfg) == cli.config_hash(json.loads(json.dumps(cfg)))


def test_dagger_subcommand_smoke(tmp_path, config_path):
    out = tmp_path / "dagger.json"
    data_out = tmp_path / "dagger.jsonl"
    rc = cli.main(
        ["--config", config_path, "dagger", "--iterations", "1", "--episodes", "1",
         "--epochs", "10", "--seed", "4", "--out", str(out), "--dataset-out", str(data_out)]
    )
    assert rc == 0
    policy = load_checkpoint(out)
    demos = load_demos_jsonl(data_out)
    assert len(demos) >= 1
    acts = policy.predict(demos[0].observation)
    assert len(acts) == policy.n_s


def test_missing_planner_flags_rejected(capsys):
    with pytest.raises(SystemExit):
        cli.main(["eval-static-grid", "--out", "x.csv"])
    with pytest.raises(SystemExit):
        cli.main(["sim", "--out", "x.jsonl"])
