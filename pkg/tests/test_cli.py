import os

import numpy as np
import pytest
from click.testing import CliRunner

from fairsel.cli import main
from fairsel.data import load_table
from fairsel.trainer import MetricsLog


CONFIG = """\
[data]
num_examples = 400
feature_dim = 2
class_priors = [0.5, 0.5]
means = [[-1.5, -1.5], [1.5, 1.5]]
variances = [[1.0, 1.0], [1.0, 1.0]]
group_prior = [0.5, 0.5]
seed = 0

[bias]
rho = 0.4
seed = 1

[model]
architecture = "linear"
input_dim = 2
num_classes = 2

[selector]
kind = "uniform"

[trainer]
n_b = 16
batch_ratio = 0.2
epochs = 2
learning_rate = 0.01

[paths]
train = "train.csv"
test = "test.csv"
out_dir = "out"
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "config.toml").write_text(CONFIG)
    return tmp_path


def cfg_path(workdir):
    return str(workdir / "config.toml")


def test_gen_data_writes_table(runner, workdir):
    res = runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    assert res.exit_code == 0, res.output
    table = load_table(workdir / "train.csv")
    assert len(table) == 400
    assert "400 examples" in res.output


def test_inject_bias_flips_labels(runner, workdir):
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    res = runner.invoke(main, ["inject-bias", "--config", cfg_path(workdir),
                               "--input", str(workdir / "train.csv"),
                               "--out", str(workdir / "biased.csv")])
    assert res.exit_code == 0, res.output
    biased = load_table(workdir / "biased.csv")
    flipped = int(np.sum(biased.y != biased.z))
    assert 0 < flipped < len(biased)
    assert f"{flipped} of 400" in res.output


def test_train_writes_metrics_and_checkpoint(runner, workdir):
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir),
                         "--out", str(workdir / "test.csv")])
    res = runner.invoke(main, ["train", "--config", cfg_path(workdir)])
    assert res.exit_code == 0, res.output
    out = workdir / "out"
    assert (out / "metrics.csv").exists()
    assert (out / "final.fsel").exists()
    log = MetricsLog.from_csv(out / "metrics.csv")
    assert len(log.rows) == 3  # initial plus two epochs
    assert "final accuracy" in res.output


def test_sweep_writes_summary(runner, workdir):
    cfg = CONFIG + "\n[sweep]\nalphas = [0.1]\ngammas = [0.3]\nseeds = [0]\n"
    (workdir / "config.toml").write_text(cfg)
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir),
                         "--out", str(workdir / "test.csv")])
    res = runner.invoke(main, ["sweep", "--config", cfg_path(workdir)])
    assert res.exit_code == 0, res.output
    lines = (workdir / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("alpha,gamma,")
    assert len(lines) == 2


def test_report_renders_charts(runner, workdir):
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir),
                         "--out", str(workdir / "test.csv")])
    runner.invoke(main, ["train", "--config", cfg_path(workdir)])
    res = runner.invoke(main, ["report", "--log",
                               str(workdir / "out" / "metrics.csv"),
                               "--out", str(workdir / "charts")])
    assert res.exit_code == 0, res.output
    for name in ("accuracy", "delta_dp", "disc_sel_rate"):
        svg = (workdir / "charts" / f"{name}.svg").read_text()
        assert svg.startswith("<svg")
        assert (workdir / "charts" / f"{name}.csv").exists()


def test_report_rejects_missing_log(runner, workdir):
    res = runner.invoke(main, ["report", "--log", str(workdir / "nope.csv"),
                               "--out", str(workdir / "charts")])
    assert res.exit_code == 2


def test_unknown_config_key_is_usage_error(runner, workdir):
    (workdir / "config.toml").write_text(CONFIG + "\n[trainer2]\nx = 1\n")
    res = runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    assert res.exit_code == 2
    assert "unknown config section" in res.output


def test_unknown_key_within_section(runner, workdir):
    (workdir / "config.toml").write_text(CONFIG.replace(
        "[trainer]", "[trainer]\nturbo = true"))
    res = runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    assert res.exit_code == 2
    assert "unknown config key [trainer].turbo" in res.output


def test_malformed_toml_is_usage_error(runner, workdir):
    (workdir / "config.toml").write_text("[data\nbroken")
    res = runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    assert res.exit_code == 2


def test_missing_section_is_usage_error(runner, workdir):
    (workdir / "config.toml").write_text("[model]\narchitecture = 'linear'\n"
                                         "input_dim = 2\nnum_classes = 2\n")
    res = runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    assert res.exit_code == 2
    assert "missing required config section [data]" in res.output


def test_verify_passes(runner):
    res = runner.invoke(main, ["verify", "--seed", "0"])
    assert res.exit_code == 0, res.output
    assert res.output.count("[PASS]") == 3


def test_train_deterministic_outputs(runner, workdir):
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir)])
    runner.invoke(main, ["gen-data", "--config", cfg_path(workdir),
                         "--out", str(workdir / "test.csv")])
    runner.invoke(main, ["train", "--config", cfg_path(workdir),
                         "--out", str(workdir / "out1")])
    runner.invoke(main, ["train", "--config", cfg_path(workdir),
                         "--out", str(workdir / "out2")])
    a = (workdir / "out1" / "final.fsel").read_bytes()
    b = (workdir / "out2" / "final.fsel").read_bytes()
    assert a == b
