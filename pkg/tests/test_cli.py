import json

import numpy as np
import pytest

from jsdm.cli import main
from jsdm.config import validate_text
from jsdm.experiments import grouping_compare_experiment, scaling_experiment

SCALING = "experiment = scaling\nseed = 7\nM = 8\ntrials = 4\nkprime = 8, 32\n"
GROUPING = "experiment = grouping-compare\nseed = 3\nM = 8\nG = 4\nK = 20, 40\n"


def run(tmp_path, text, *extra, name="run.cfg", out="out"):
    cfg = tmp_path / name
    cfg.write_text(text)
    return main([text.split("=", 1)[1].split()[0], "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def csv_bodies(directory):
    return {p.name: p.read_text() for p in sorted(directory.glob("*.csv"))}


def test_success_writes_outputs(tmp_path, capsys):
    assert run(tmp_path, SCALING) == 0
    out_dir = tmp_path / "out" / capsys.readouterr().out.strip().split("/")[-1]
    files = csv_bodies(out_dir)
    assert {"summary.csv", "scaling.csv"} <= set(files)
    meta = json.loads((out_dir / "metadata.json").read_text())
    for body in files.values():
        assert body.startswith(f"# config_hash: {meta['config_hash']}\n")
    assert out_dir.name == f"scaling-{meta['config_hash'][:8]}"
    assert "trials" not in meta["defaulted_keys"] and "P_dB" in meta["defaulted_keys"]


def test_config_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "experiment = scaling\nM = 0\n") == 2
    err = capsys.readouterr().err
    assert "'seed'" in err and "'M'" in err


def test_experiment_mismatch_is_config_error(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SCALING)
    assert main(["ccdf", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # two rank-3 groups cannot be block diagonalized on four antennas
    assert run(tmp_path, "experiment = scaling\nseed = 1\nM = 4\nrank = 3\ntrials = 1\nkprime = 4\n") == 3
    assert "numerical failure" in capsys.readouterr().err


def test_rerun_is_byte_identical(tmp_path, capsys):
    assert run(tmp_path, SCALING, out="a") == 0
    assert run(tmp_path, SCALING, out="b") == 0
    capsys.readouterr()
    (da,), (db,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
    assert csv_bodies(da) == csv_bodies(db)


def test_seed_override_changes_directory(tmp_path, capsys):
    assert run(tmp_path, SCALING) == 0
    assert run(tmp_path, SCALING, "--seed", "8") == 0
    assert len(list((tmp_path / "out").iterdir())) == 2


def test_changed_config_goes_to_new_directory(tmp_path):
    assert run(tmp_path, SCALING) == 0
    assert run(tmp_path, SCALING.replace("trials = 4", "trials = 5")) == 0
    assert len(list((tmp_path / "out").iterdir())) == 2


def test_extra_trials_leave_earlier_trials_unchanged():
    base = dict(M=8, group_theta_deg=[-30.0, 30.0], delta_deg=10.0, rank=3, P=10.0, kprime=[8, 32], seed=5)
    short = scaling_experiment(trials=3, **base)
    long = scaling_experiment(trials=6, **base)
    np.testing.assert_array_equal(short.trial_rates, long.trial_rates[:3])


def test_extra_trials_grouping_compare():
    cfg = validate_text(GROUPING).config
    short = grouping_compare_experiment(cfg, 10.0, 2, 3)
    long = grouping_compare_experiment(cfg, 10.0, 4, 3)
    for key, values in short.se.items():
        np.testing.assert_array_equal(values, long.se[key][:2])


@pytest.mark.parametrize("experiment", ["ccdf", "largesystem"])
def test_other_experiments_run(tmp_path, capsys, experiment):
    extra = {"ccdf": "M = 4\nmc_draws = 2000\n", "largesystem": "M = 8\nN_values = 4, 8\n"}[experiment]
    assert run(tmp_path, f"experiment = {experiment}\nseed = 2\n{extra}") == 0
