"""Command-line surface: config parsing, subcommands, exit codes, artifacts."""

import csv
import hashlib
import os

import numpy as np
import pytest

from cenav import cli
from cenav.config import ConfigError, RunConfig
from cenav.dataset import read_dataset
from cenav.flow.model import FlowModel

TINY_CFG = """
seed = 7
world.side = 10.0
world.n_obstacles = 8
world.min_separation = 5.0
world.max_steps = 200
world.n_worlds = 6
world.target_samples = 400
expert.epochs = 3
expert.n_layers = 2
expert.hidden = 16
expert.embed_dim = 16
expert.batch_size = 128
rl.n_envs = 4
rl.side = 10.0
rl.n_obstacles = 5
rl.min_separation = 5.0
rl.max_steps = 60
rl.horizon = 8
rl.epochs = 2
rl.minibatches = 2
rl.n_updates = 2
rl.embed_dim = 32
rl.hidden = 32
eval.densities = 5
eval.side = 10.0
eval.n_pairs = 3
eval.min_separation = 5.0
eval.max_steps = 80
"""


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Shared tiny pipeline artifacts: config, dataset, expert checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY_CFG)
    assert cli.main(["gen-data", "--config", str(cfg),
                     "--out", str(root / "gd")]) == 0
    assert cli.main(["train-expert", "--config", str(cfg),
                     "--data", str(root / "gd" / "dataset.bin"),
                     "--out", str(root / "te")]) == 0
    return {"root": root, "cfg": str(cfg),
            "data": str(root / "gd" / "dataset.bin"),
            "expert": str(root / "te" / "expert.cenv")}


# ------------------------------------------------------------------ config


def test_config_defaults_and_unknown_key(tmp_path):
    cfg = RunConfig()
    assert cfg["rl.n_updates"] == 300
    assert cfg["eval.goal_radius"] == 0.3
    with pytest.raises(ConfigError, match="unknown config key"):
        cfg.set("rl.horizont", "64")
    bad = tmp_path / "bad.cfg"
    bad.write_text("rl.horizont = 64\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(bad)


def test_config_echo_reparses_identically(tmp_path):
    cfg = RunConfig()
    cfg.set("rl.gamma", "0.95")
    cfg.set("eval.densities", "100,300")
    cfg.set("embodiment.tau", "0.4")
    echoed = tmp_path / "echo.cfg"
    echoed.write_text(cfg.echo())
    again = RunConfig.from_file(echoed)
    assert again.values == cfg.values


def test_config_malformed_line_rejected(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ConfigError, match="key = value"):
        RunConfig.from_file(bad)


def test_bad_config_file_exits_usage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("world.sid = 9\n")
    code = cli.main(["gen-data", "--config", str(bad), "--n-worlds", "0",
                     "--out", str(tmp_path / "out")])
    assert code == 1


# ---------------------------------------------------------------- gen-data


def test_gen_data_zero_worlds(tmp_path, capsys):
    code = cli.main(["gen-data", "--n-worlds", "0",
                     "--out", str(tmp_path / "gd0")])
    assert code == 0
    out = capsys.readouterr().out
    assert "worlds=0" in out and "samples=0" in out
    obs, actions = read_dataset(tmp_path / "gd0" / "dataset.bin")
    assert obs.shape == (0, 151) and actions.shape == (0, 3)


def test_gen_data_reproducible_and_stats(work, tmp_path, capsys):
    code = cli.main(["gen-data", "--config", work["cfg"],
                     "--out", str(tmp_path / "again")])
    assert code == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert all(part in line for part in
               ("worlds=", "successes=", "samples=", "success_rate="))
    assert sha(tmp_path / "again" / "dataset.bin") == sha(work["data"])
    assert (tmp_path / "again" / "config.txt").exists()
    assert (tmp_path / "again" / "stats.txt").exists()


# ------------------------------------------------------------ train-expert


def test_train_expert_nll_progress_and_roundtrip(work, tmp_path):
    with open(work["root"] / "te" / "nll.csv") as f:
        rows = list(csv.DictReader(f))
    nll = [float(r["nll"]) for r in rows]
    assert len(nll) == 3 and nll[-1] < nll[0]
    obs, actions = read_dataset(work["data"])
    probe_o, probe_a = obs[:32], actions[:32]
    lp1 = FlowModel.load(work["expert"]).log_prob(probe_a, probe_o)
    lp2 = FlowModel.load(work["expert"]).log_prob(probe_a, probe_o)
    assert np.array_equal(lp1, lp2)
    # identical seed and data give an identical checkpoint file
    code = cli.main(["train-expert", "--config", work["cfg"],
                     "--data", work["data"], "--out", str(tmp_path / "te2")])
    assert code == 0
    assert sha(tmp_path / "te2" / "expert.cenv") == sha(work["expert"])


def test_train_expert_missing_data_fails(tmp_path):
    code = cli.main(["train-expert", "--data", str(tmp_path / "nope.bin"),
                     "--out", str(tmp_path / "te")])
    assert code == 2


# ----------------------------------------------------------- train-refiner


def test_train_refiner_smoke_and_frozen_expert(work, tmp_path, capsys):
    before = sha(work["expert"])
    code = cli.main(["train-refiner", "--config", work["cfg"],
                     "--expert", work["expert"], "--embodiment", "ideal",
                     "--out", str(tmp_path / "tr")])
    assert code == 0
    out = capsys.readouterr().out
    assert "ETT:" in out
    assert (tmp_path / "tr" / "policy.cenv").exists()
    assert (tmp_path / "tr" / "train_log.csv").exists()
    assert sha(work["expert"]) == before


def test_train_refiner_missing_expert_fails(work, tmp_path):
    code = cli.main(["train-refiner", "--config", work["cfg"],
                     "--expert", str(tmp_path / "missing.cenv"),
                     "--out", str(tmp_path / "tr")])
    assert code == 2


# -------------------------------------------------------------------- eval


def test_eval_zero_stub_builds_suite(work, tmp_path, capsys):
    out = tmp_path / "ev"
    code = cli.main(["eval", "--config", work["cfg"], "--policy", "zero",
                     "--out", str(out)])
    assert code == 0
    assert "SR=0.000" in capsys.readouterr().out
    with open(out / "report.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["density", "sr", "spl"]
    assert float(rows[1][1]) == 0.0
    # suite was created on demand and reloads with identical pairs
    from cenav.eval.suite import BenchmarkSuite

    a = BenchmarkSuite.load(out / "suite.txt")
    b = BenchmarkSuite.load(out / "suite.txt")
    assert np.array_equal(a.tasks[5].starts, b.tasks[5].starts)


def test_eval_policy_with_trajectories(work, tmp_path):
    tr = tmp_path / "tr"
    assert cli.main(["train-refiner", "--config", work["cfg"],
                     "--expert", work["expert"], "--embodiment", "ideal",
                     "--out", str(tr)]) == 0
    out = tmp_path / "ev"
    code = cli.main(["eval", "--config", work["cfg"],
                     "--policy", str(tr / "policy.cenv"),
                     "--expert", work["expert"], "--embodiment", "ideal",
                     "--dump-trajectories", "--out", str(out)])
    assert code == 0
    trajs = sorted((out / "trajectories").glob("*.csv"))
    assert len(trajs) == 3  # one per suite episode
    with open(trajs[0]) as f:
        assert f.readline().strip() == "t,x,y,theta,vx,vy,vyaw,reward"


def test_eval_usage_errors(work, tmp_path):
    assert cli.main(["eval", "--config", work["cfg"],
                     "--out", str(tmp_path / "e1")]) == 1
    assert cli.main(["eval", "--config", work["cfg"], "--policy", "zero",
                     "--expert-only", "--out", str(tmp_path / "e2")]) == 1
    assert cli.main(["eval", "--config", work["cfg"], "--expert-only",
                     "--out", str(tmp_path / "e3")]) == 1


def test_eval_expert_only_mode(work, tmp_path):
    code = cli.main(["eval", "--config", work["cfg"], "--expert-only",
                     "--expert", work["expert"], "--embodiment", "ideal",
                     "--out", str(tmp_path / "ge")])
    assert code == 0
    assert (tmp_path / "ge" / "report.csv").exists()


# ------------------------------------------------------------------ ablate


def test_ablate_rows_and_determinism(work, tmp_path):
    args = ["ablate", "--config", work["cfg"], "--data", work["data"],
            "--expert", work["expert"], "--embodiment", "ideal"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0

    def table(path):
        with open(path / "ablation.csv") as f:
            return list(csv.DictReader(f))

    rows_a, rows_b = table(a), table(b)
    assert [r["variant"] for r in rows_a] == [
        "full", "pure-rl", "static-0.5", "regr-rl",
        "ge-only-flow", "ge-only-regr"]
    assert all("ett_hours" in r for r in rows_a)
    # scores are exactly reproducible; ETT is wall clock and is not
    for ra, rb in zip(rows_a, rows_b):
        scores_a = {k: v for k, v in ra.items() if k != "ett_hours"}
        scores_b = {k: v for k, v in rb.items() if k != "ett_hours"}
        assert scores_a == scores_b
    assert (a / "report_full.csv").exists()


# ------------------------------------------------------------ export-modes


def test_export_modes_csv_and_reproducibility(work, tmp_path):
    base = ["export-modes", "--expert", work["expert"], "--scene", "bimodal",
            "--n", "40"]
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(base + ["--seed", "3", "--out", str(a)]) == 0
    assert cli.main(base + ["--seed", "3", "--out", str(b)]) == 0
    assert cli.main(base + ["--seed", "4", "--out", str(c)]) == 0
    with open(a / "modes.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["vx", "vy", "vyaw"] and len(rows) == 41
    assert sha(a / "modes.csv") == sha(b / "modes.csv")
    assert sha(a / "modes.csv") != sha(c / "modes.csv")


def test_export_modes_unknown_scene(work, tmp_path):
    assert cli.main(["export-modes", "--expert", work["expert"],
                     "--scene", "mars", "--out", str(tmp_path / "em")]) == 1


# ------------------------------------------------------------- entry/misc


def test_unknown_command_and_no_command():
    assert cli.main(["definitely-not-a-command"]) == 1
    assert cli.main([]) == 1


def test_threads_validation(tmp_path, monkeypatch):
    assert cli.main(["gen-data", "--n-worlds", "0", "--threads", "0",
                     "--out", str(tmp_path / "t0")]) == 1
    monkeypatch.setenv("CENAV_THREADS", "banana")
    assert cli.main(["gen-data", "--n-worlds", "0",
                     "--out", str(tmp_path / "t1")]) == 1
    monkeypatch.setenv("CENAV_THREADS", "1")
    assert cli.main(["gen-data", "--n-worlds", "0",
                     "--out", str(tmp_path / "t2")]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "1"