import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from uavris.cli import main
from uavris.harness import moving_average

REFERENCE = Path(__file__).resolve().parents[1] / "configs" / "reference.cfg"

# small networks and short episodes keep these end-to-end checks fast
FAST = "hidden = 16,16\nwarmup = 20\nbatch_size = 8\nT = 5\neval_seeds = 2\n" \
       "search_tau_levels = 11\nsearch_power_levels = 5\nsearch_phase_levels = 4\n"


@pytest.fixture
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text(REFERENCE.read_text() + FAST)
    return path


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_probe_reference_config():
    res = run("probe", REFERENCE, "--trials", 3)
    assert res.exit_code == 0, res.output
    out = res.output
    for line in ("N = 16", "P_BS_max = 500.0", "R_min = 70000000.0", "c = 6400", "d = 0.003",
                 "beta0_linear = 0.001", "action_dim = 20", "state_dim = 301"):
        assert line in out.splitlines(), line
    assert "qos_feasible_fraction" in out


def test_missing_key_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("\n".join(l for l in REFERENCE.read_text().splitlines() if not l.startswith("c =")))
    res = CliRunner().invoke(main, ["probe", str(bad)])
    assert res.exit_code == 2
    assert "missing required key(s): c" in res.output


def test_line_anchored_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(REFERENCE.read_text() + "oops\n")
    res = CliRunner().invoke(main, ["train", str(bad), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2 and "line" in res.output


def test_unreadable_config(tmp_path):
    res = CliRunner().invoke(main, ["probe", str(tmp_path / "missing.cfg")])
    assert res.exit_code == 2


def test_bad_list_is_config_error(fast_cfg, tmp_path):
    res = CliRunner().invoke(main, ["sweep-jitter", str(fast_cfg), "--seeds", "a,b",
                                    "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_runtime_error_exit_code(fast_cfg, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = CliRunner().invoke(main, ["train", str(fast_cfg), "--episodes", "0",
                                    "--out", str(blocker / "sub")])
    assert res.exit_code == 3


def test_train_zero_episodes(fast_cfg, tmp_path):
    out = tmp_path / "run"
    res = run("train", fast_cfg, "--episodes", 0, "--out", out)
    assert res.exit_code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["episodes"] == 0 and manifest["algorithm"] == "ssd3"
    assert (out / "train_metrics.jsonl").read_text() == ""


def test_train_is_reproducible_and_replayable(fast_cfg, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out in (a, b):
        assert run("train", fast_cfg, "--algo", "td3", "--episodes", 6, "--seed", 4,
                   "--out", out).exit_code == 0
    metrics = (a / "train_metrics.jsonl").read_bytes()
    assert metrics == (b / "train_metrics.jsonl").read_bytes()
    # the manifest alone reproduces the run
    assert run("train", a / "manifest.json", "--algo", "td3", "--episodes", 6, "--seed", 4,
               "--out", c).exit_code == 0
    assert metrics == (c / "train_metrics.jsonl").read_bytes()
    rows = [json.loads(l) for l in metrics.decode().splitlines()]
    assert [r["episode"] for r in rows] == list(range(6))
    for r in rows:
        assert len(r["eh_efficiency"]) == 5
        assert all(0 <= v < 1 for v in r["eh_efficiency"])
    assert (a / "checkpoint.npz").exists()


def test_sweep_jitter_outputs(fast_cfg, tmp_path):
    out = tmp_path / "sweep"
    res = run("sweep-jitter", fast_cfg, "--sigmas", "0,0.2", "--seeds", "0,1",
              "--episodes", 3, "--out", out)
    assert res.exit_code == 0, res.output
    lines = (out / "reward_curves.csv").read_text().splitlines()
    assert lines[0].startswith("#") and "window = 10" in lines[0]
    rows = list(csv.DictReader(lines[1:]))
    assert {r["sigma_j"] for r in rows} == {"0", "0.2"}
    assert len(rows) == 2 * 2 * 3
    for s in ("0", "0.2"):
        assert (out / f"sigma_{s}" / "reward_curves.csv").exists()
        for seed in (0, 1):
            assert (out / f"sigma_{s}" / f"seed_{seed}" / "manifest.json").exists()
        eps = [int(r["episode"]) for r in rows if r["sigma_j"] == s and r["seed"] == "0"]
        assert eps == sorted(eps)


def test_sweep_single_sub_run(fast_cfg, tmp_path):
    out = tmp_path / "one"
    assert run("sweep-jitter", fast_cfg, "--sigmas", "0", "--seeds", "0", "--episodes", 1,
               "--out", out).exit_code == 0
    assert len([p for p in (out / "sigma_0").iterdir() if p.is_dir()]) == 1


def test_compare_outputs(fast_cfg, tmp_path):
    out = tmp_path / "cmp"
    res = run("compare", fast_cfg, "--algos", "ssd3,ddpg", "--seeds", "0,1", "--episodes", 4,
              "--out", out)
    assert res.exit_code == 0, res.output
    summary = list(csv.DictReader((out / "summary.csv").open()))
    assert [r["method"] for r in summary] == ["ssd3", "ddpg", "guided", "random"]
    for r in summary:
        assert 0 <= float(r["mean_eh_eff"]) <= 1
    steps = list(csv.DictReader((out / "eval_steps.csv").open()))
    assert set(steps[0]) == {"method", "slot", "step", "eh_efficiency"}
    slots = {m: {r["slot"] for r in steps if r["method"] == m} for m in ("ssd3", "guided", "random")}
    assert slots["ssd3"] == slots["guided"] == slots["random"] and len(slots["ssd3"]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["system"]["sigma_j"] == 0.1
    assert sorted(manifest["eval_seeds"]) == sorted(int(s) for s in slots["ssd3"])
    assert "guided" in res.output


def test_compare_unknown_method(fast_cfg, tmp_path):
    res = CliRunner().invoke(main, ["compare", str(fast_cfg), "--algos", "sac",
                                    "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_moving_average():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4], 2), [1, 1.5, 2.5, 3.5])
    np.testing.assert_allclose(moving_average([5.0], 10), [5.0])
    with pytest.raises(ValueError):
        moving_average([1.0], 0)
