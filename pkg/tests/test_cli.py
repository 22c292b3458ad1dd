import json
import os
import subprocess
import sys

import numpy as np
import pytest

from tipcast.cli import main


def run_cli(*argv):
    """Run in-process for speed; returns exit code."""
    return main(list(argv))


def run_cli_proc(*argv, env=None):
    """Subprocess run (exit-code semantics incl. argparse usage errors)."""
    e = dict(os.environ)
    if env:
        e.update(env)
    return subprocess.run([sys.executable, "-m", "tipcast.cli", *argv],
                          capture_output=True, text=True, env=e)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli_corpus"))
    code = run_cli("generate", "--count-per-type", "10", "--noise", "white",
                   "--seed", "7", "--out", out)
    assert code == 0
    return out


class TestGenerate:
    def test_manifest_counts(self, corpus_dir):
        man = json.load(open(os.path.join(corpus_dir, "manifest.json")))
        assert man["count"] == 30
        assert man["counts"] == {"fold": 10, "hopf": 10, "transcritical": 10}

    def test_config_echo_written(self, corpus_dir):
        echo = json.load(open(os.path.join(corpus_dir, "config_echo.json")))
        assert echo["command"] == "generate"
        assert echo["args"]["seed"] == "7"

    def test_missing_out_usage_error(self):
        proc = run_cli_proc("generate", "--count-per-type", "5")
        assert proc.returncode == 2

    def test_repeat_same_hash(self, corpus_dir, tmp_path):
        out2 = str(tmp_path / "again")
        assert run_cli("generate", "--count-per-type", "10", "--noise",
                       "white", "--seed", "7", "--out", out2) == 0
        man1 = json.load(open(os.path.join(corpus_dir, "manifest.json")))
        man2 = json.load(open(os.path.join(out2, "manifest.json")))
        assert man1["content_hash"] == man2["content_hash"]

    def test_env_var_flag(self, tmp_path):
        out = str(tmp_path / "envgen")
        proc = run_cli_proc("generate", "--count-per-type", "2", "--out", out,
                            env={"TIPCAST_SEED": "99"})
        assert proc.returncode == 0
        echo = json.load(open(os.path.join(out, "config_echo.json")))
        assert echo["args"]["seed"] == "99"


class TestSimulate:
    def test_may_label(self, tmp_path):
        out = str(tmp_path / "may")
        assert run_cli("simulate", "--model", "may_fold", "--init-h", "0.1",
                       "--seed", "1", "--out", out) == 0
        label = json.load(open(os.path.join(out, "label.json")))
        assert label["mu_c"] == pytest.approx(0.268, abs=0.005)
        assert label["bif_type"] == "fold"
        header = open(os.path.join(out, "trajectory.csv")).readline().strip()
        assert header == "t,mu,x0"

    def test_sprott_decreasing_label(self, tmp_path):
        out = str(tmp_path / "sprott")
        assert run_cli("simulate", "--model", "sprott_b_hysteresis",
                       "--direction", "down", "--out", out) == 0
        label = json.load(open(os.path.join(out, "label.json")))
        assert label["mu_c"] == pytest.approx(1.539 * np.pi, abs=0.005 * np.pi)

    def test_unknown_model_usage_error(self):
        proc = run_cli_proc("simulate", "--model", "lorenz", "--out", "/tmp/x")
        assert proc.returncode == 2

    def test_bad_flag_value(self):
        proc = run_cli_proc("simulate", "--model", "may_fold", "--rate",
                            "abc", "--out", "/tmp/x")
        assert proc.returncode == 2

    def test_polynomial_json(self, tmp_path):
        a = [0.0] * 10
        a[0] = -1.0  # dx/dt = mu + x^2 once the constant is the parameter
        a[3] = 1.0
        b = [0.0] * 10
        b[2] = -1.0
        spath = tmp_path / "system.json"
        spath.write_text(json.dumps({"a": a, "b": b, "bif_param_index": 0}))
        out = str(tmp_path / "poly")
        assert run_cli("simulate", "--system-json", str(spath), "--rate",
                       "0.001", "--out", out) == 0
        label = json.load(open(os.path.join(out, "label.json")))
        assert label["mu_c"] == pytest.approx(0.0, abs=0.05)


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    # ramped AR(1) approaching coefficient 1 at mu ~ 1
    rng = np.random.default_rng(5)
    n = 2_000
    mu = np.linspace(0.0, 0.75, n)
    phi = 0.3 + 0.65 * mu
    x = np.empty(n)
    acc = 0.0
    eps = rng.standard_normal(n) * 0.05
    for i in range(n):
        acc = phi[i] * acc + eps[i]
        x[i] = acc
    path = tmp_path_factory.mktemp("series") / "series.csv"
    with open(path, "w") as fh:
        fh.write("mu,x\n")
        for m, v in zip(mu, x):
            fh.write("%.17g,%.17g\n" % (m, v))
    return str(path)


class TestPredict:
    def test_bb_with_truth(self, series_csv, capsys):
        code = run_cli("predict", "--method", "bb", "--in", series_csv,
                       "--truth", "1.0", "--mu-end", "0.75")
        out = capsys.readouterr().out
        assert code == 0
        assert "mu_hat=" in out and "epsilon=" in out

    def test_dev_config_echo(self, series_csv, tmp_path, capsys):
        out_dir = str(tmp_path / "dev_out")
        code = run_cli("predict", "--method", "dev", "--in", series_csv,
                       "--E", "3", "--theta", "0.0", "--out", out_dir)
        assert code in (0, 1)  # extrapolation may legitimately fail
        echo = json.load(open(os.path.join(out_dir, "config_echo.json")))
        assert echo["args"]["E"] == "3"
        assert echo["args"]["theta"] == "0.0"

    def test_dl_without_model_dir_errors(self, series_csv):
        proc = run_cli_proc("predict", "--method", "dl", "--in", series_csv)
        assert proc.returncode == 1
        assert "model-dir" in proc.stderr

    def test_null_method(self, series_csv, capsys):
        code = run_cli("predict", "--method", "null", "--in", series_csv)
        assert code == 0
        assert "mu_hat=" in capsys.readouterr().out


class TestEvaluate:
    def test_small_may_evaluation(self, tmp_path, capsys):
        out = str(tmp_path / "eval")
        code = run_cli("evaluate", "--model", "may_fold", "--methods",
                       "df,dev,null", "--n-series", "3",
                       "--initial-values", "0.1,0.2", "--seed", "2",
                       "--out", out)
        assert code == 0
        comp = open(os.path.join(out, "comparison.csv")).read().splitlines()
        assert comp[0] == "model,initial_value,method,mean_eps,ci_lo,ci_hi,n_fail"
        assert len(comp) == 1 + 2 * 3  # 2 ivs x 3 methods
        assert os.path.exists(os.path.join(out, "plotdata_may_fold.csv"))

    def test_methods_exclude_dl_cleanly(self, tmp_path):
        out = str(tmp_path / "eval2")
        code = run_cli("evaluate", "--model", "may_fold", "--methods",
                       "null", "--n-series", "2", "--initial-values", "0.2",
                       "--seed", "2", "--out", out)
        assert code == 0

    def test_unknown_method(self, tmp_path):
        proc = run_cli_proc("evaluate", "--model", "may_fold", "--methods",
                            "df,rosa", "--out", str(tmp_path / "x"))
        assert proc.returncode == 1
        assert "unknown method" in proc.stderr

    def test_dl_without_predictions_errors(self, tmp_path):
        proc = run_cli_proc("evaluate", "--model", "may_fold", "--methods",
                            "dl", "--n-series", "2", "--initial-values",
                            "0.2", "--out", str(tmp_path / "y"))
        assert proc.returncode == 1
        assert "never substituted" in proc.stderr
