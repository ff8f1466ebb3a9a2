import json
import logging
import os
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from abmode import ConfigError, EstimationConfig
from abmode.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, main
from abmode.config import model_spec


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestModelSpec:
    def test_defaults(self):
        params, config = model_spec("mnl")
        assert params.n_free == 18 and config == EstimationConfig()

    def test_sections(self, tmp_path):
        spec = write(tmp_path / "m.ini", "[model]\nrandom = B_cost, ASC_ab\n[start]\nB_cost = -2\n"
                                         "[fix]\nB_time = -1.5\n[optimizer]\nmax_iter = 7\ngtol = 1e-6\n")
        params, config = model_spec("mixl", spec)
        assert params.random_coefficients == ["B_cost", "ASC_ab"]
        assert params["B_cost"] == -2.0
        assert params.param("B_time").fixed and params["B_time"] == -1.5
        assert config.max_iter == 7 and config.gtol == 1e-6

    def test_hcm_sigma_switch(self, tmp_path):
        spec = write(tmp_path / "h.ini", "[model]\nestimate_sigma_s = false\n")
        assert model_spec("hcm", spec)[0].n_free == 36

    def test_reference_start(self, tmp_path):
        spec = write(tmp_path / "r.ini", "[model]\nreference_start = yes\n")
        assert model_spec("mnl", spec)[0]["B_cost"] == pytest.approx(-1.17, abs=0.5)

    @pytest.mark.parametrize("text", [
        "[optimizer]\nbogus = 1\n",
        "[start]\nB_nothing = 1\n",
        "[start]\nB_cost = abc\n",
        "[model]\nrandom = B_nothing\n",
        "not an ini file",
    ])
    def test_invalid(self, tmp_path, text):
        with pytest.raises(ConfigError):
            model_spec("mixl", write(tmp_path / "bad.ini", text))

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            model_spec("probit")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            model_spec("mnl", tmp_path / "absent.ini")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--kind", "mnl", "--individuals", "80", "--seed", "3", "--out", str(root / "s")]) == 0
    assert main(["estimate", "--model", "mnl", "--data", str(root / "s/choices.csv"),
                 "--out", str(root / "e")]) == 0
    return root


class TestCommands:
    def test_manifest(self, workspace):
        manifest = json.loads((workspace / "e/manifest.json").read_text())
        assert manifest["status"] == "ok" and manifest["command"] == "estimate"
        assert set(manifest["input_digests"]) == {"data"}
        assert "result.json" in manifest["outputs"]

    def test_reported_aic(self, workspace):
        r = json.loads((workspace / "e/result.json").read_text())
        assert r["convergence"]["converged"]
        assert r["AIC"] == pytest.approx(2 * r["K"] - 2 * r["LL_final"], abs=1e-9)
        assert r["BIC"] == pytest.approx(r["K"] * np.log(r["n_obs"]) - 2 * r["LL_final"], abs=1e-9)

    def test_simulate_grid(self, workspace):
        out = workspace / "sim"
        assert main(["simulate", "--params", str(workspace / "e/result.json"), "--data",
                     str(workspace / "s/choices.csv"), "--draws", "20", "--out", str(out)]) == 0
        shares = pd.read_csv(out / "shares.csv")
        assert len(shares) == 30
        np.testing.assert_allclose(shares.filter(like="share_").sum(axis=1), 1.0, atol=1e-9)

    def test_impact_without_adoption_is_zero(self, workspace):
        out = workspace / "imp"
        assert main(["impact", "--params", str(workspace / "e/result.json"), "--data",
                     str(workspace / "s/choices.csv"), "--draws", "10", "--no-adoption", "--out", str(out)]) == 0
        frame = pd.read_csv(out / "impacts.csv")
        assert len(frame) > 0 and np.all(frame["percent_change"] == 0.0)

    def test_stale_parameters_warn(self, workspace, tmp_path, caplog):
        frame = pd.read_csv(workspace / "s/choices.csv")
        changed = tmp_path / "changed.csv"
        frame.iloc[:-1].to_csv(changed, index=False)
        with caplog.at_level(logging.WARNING, logger="abmode"):
            assert main(["simulate", "--params", str(workspace / "e/result.json"), "--data", str(changed),
                         "--draws", "5", "--out", str(tmp_path / "o")]) == 0
        assert "stale" in caplog.text

    def test_validate(self, workspace, tmp_path):
        assert main(["validate", "--model", "mnl", "--data", str(workspace / "s/choices.csv"), "--folds", "3",
                     "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "cv_accuracy.csv")
        assert len(table) > 0

    def test_bikeability_pipeline(self, tmp_path):
        assert main(["synth", "--kind", "bikeability", "--individuals", "60", "--out", str(tmp_path / "b")]) == 0
        trips = str(tmp_path / "b/trips.csv")
        assert main(["estimate", "--model", "bikeability", "--data", trips, "--out", str(tmp_path / "e")]) == 0
        assert main(["bikeability", "--data", trips, "--params", str(tmp_path / "e/result.json"),
                     "--out", str(tmp_path / "c")]) == 0
        assert len(pd.read_csv(tmp_path / "c/classified.csv")) == len(pd.read_csv(trips))


class TestExitCodes:
    def test_missing_column_named(self, workspace, tmp_path, capsys):
        frame = pd.read_csv(workspace / "s/choices.csv").drop(columns="ab_cost_rate")
        bad = tmp_path / "bad.csv"
        frame.to_csv(bad, index=False)
        assert main(["estimate", "--model", "mnl", "--data", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
        assert "ab_cost_rate" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["estimate", "--model", "mnl", "--data", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path)]) == EXIT_INPUT

    def test_bad_config(self, workspace, tmp_path):
        spec = write(tmp_path / "bad.ini", "[optimizer]\nbogus = 1\n")
        assert main(["estimate", "--model", "mnl", "--data", str(workspace / "s/choices.csv"), "--spec", spec,
                     "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_nonconvergence(self, workspace, tmp_path):
        spec = write(tmp_path / "short.ini", "[optimizer]\nmax_iter = 2\nnewton_steps = 0\n")
        code = main(["estimate", "--model", "mnl", "--data", str(workspace / "s/choices.csv"), "--spec", spec,
                     "--out", str(tmp_path / "o")])
        assert code == EXIT_NONCONVERGED
        assert json.loads((tmp_path / "o/manifest.json").read_text())["status"] == "not converged"

    def test_raking_nonconvergence(self, workspace, tmp_path):
        code = main(["weight", "--data", str(workspace / "s/choices.csv"), "--max-iter", "3",
                     "--out", str(tmp_path)])
        assert code == EXIT_NONCONVERGED

    def test_bad_arguments(self):
        assert main(["estimate", "--model", "probit"]) == EXIT_INPUT

    def test_env_spec_override(self, workspace, tmp_path, monkeypatch):
        spec = write(tmp_path / "fix.ini", "[fix]\nB_cost = -1\n")
        monkeypatch.setenv("ABMODE_SPEC", spec)
        assert main(["estimate", "--model", "mnl", "--data", str(workspace / "s/choices.csv"),
                     "--out", str(tmp_path / "o")]) == EXIT_OK
        assert json.loads((tmp_path / "o/result.json").read_text())["K"] == 17

    def test_flag_beats_env(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setenv("ABMODE_SPEC", write(tmp_path / "fix.ini", "[fix]\nB_cost = -1\n"))
        plain = write(tmp_path / "plain.ini", "[model]\n")
        assert main(["estimate", "--model", "mnl", "--data", str(workspace / "s/choices.csv"), "--spec", plain,
                     "--out", str(tmp_path / "o")]) == EXIT_OK
        assert json.loads((tmp_path / "o/result.json").read_text())["K"] == 18


def _run_cli(args, env_extra):
    env = dict(os.environ, **env_extra)
    return subprocess.run([sys.executable, "-m", "abmode.cli", *args], env=env, capture_output=True, text=True)


def test_results_independent_of_thread_count(tmp_path):
    env = {"NUMBA_NUM_THREADS": "4"}
    assert _run_cli(["synth", "--kind", "mixl", "--individuals", "40", "--seed", "5", "--out",
                     str(tmp_path / "s")], env).returncode == 0
    data = str(tmp_path / "s/choices.csv")
    outputs = {}
    for threads in ("1", "4"):
        est = tmp_path / f"e{threads}"
        done = _run_cli(["estimate", "--model", "mixl", "--data", data, "--draws", "30", "--threads", threads,
                         "--out", str(est)], env)
        assert done.returncode in (0, 1), done.stderr
        sim = tmp_path / f"sim{threads}"
        done = _run_cli(["simulate", "--params", str(est / "result.json"), "--data", data, "--draws", "30",
                         "--threads", threads, "--out", str(sim)], env)
        assert done.returncode == 0, done.stderr
        outputs[threads] = [(est / "result.json").read_bytes(), (sim / "shares.csv").read_bytes(),
                            (sim / "shifts.csv").read_bytes()]
    assert outputs["1"] == outputs["4"]
