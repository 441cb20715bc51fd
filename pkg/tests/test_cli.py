"""Command-line runs: exit codes, output files and their schemas."""
import json

import numpy as np
import pandas as pd
import pytest

import cli
from config.settings import get_settings
from models.epochs import Epoch
from services.heavy_traffic import build_ht_result
from services.model_library import mm1_model, two_type_model
from services.reports import ht_summary

from conftest import TWO_TYPE_LAMBDA

PMF_COLUMNS = ["n", "probability", "epoch"]
SIM_COLUMNS = ["n", "frequency", "epoch"]


@pytest.fixture
def model_file(tmp_path):
    def write(model, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(model.document()))
        return str(path)

    return write


def _run(argv, out, **kwargs):
    return cli.main(argv + ["--out", str(out)], **kwargs)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestParseGrid:
    def test_inclusive_range(self):
        assert cli.parse_grid("0.1:0.3:0.1") == pytest.approx([0.1, 0.2, 0.3])

    def test_comma_list(self):
        assert cli.parse_grid("0.3, 0.5") == [0.3, 0.5]

    @pytest.mark.parametrize("text", ["a:b:c", "0.5:0.1:0.1", "0.1:0.5:0"])
    def test_rejects_bad_grids(self, text):
        with pytest.raises(cli.InputError):
            cli.parse_grid(text)


class TestSolve:
    def test_two_type_solution(self, tmp_path, model_file):
        code = _run(["solve", "--model", model_file(two_type_model(TWO_TYPE_LAMBDA))], tmp_path)
        assert code == 0
        solution = json.loads((tmp_path / "solution.json").read_text())["solution"]
        assert solution["rho"] == pytest.approx(21.466 * TWO_TYPE_LAMBDA, rel=1e-4)
        assert solution["lambda"] == TWO_TYPE_LAMBDA
        assert len(solution["roots"]) == 1
        assert sum(solution["f1"]) == pytest.approx(1.0, abs=1e-10)

    def test_pmf_export(self, tmp_path, model_file):
        code = _run(["solve", "--model", model_file(mm1_model()), "--pmf", "--epoch", "departure", "--epoch", "arbitrary"], tmp_path)
        assert code == 0
        frame = pd.read_csv(tmp_path / "pmf_departure.csv")
        assert list(frame.columns) == PMF_COLUMNS
        assert frame["probability"].iloc[0] == pytest.approx(0.5, abs=1e-8)
        assert set(frame["epoch"]) == {"departure"}
        assert (tmp_path / "pmf_arbitrary.csv").exists()

    def test_manifest_lists_outputs(self, tmp_path, model_file):
        _run(["solve", "--model", model_file(mm1_model()), "--pmf"], tmp_path)
        manifest = _manifest(tmp_path)
        assert manifest["command"] == "solve"
        assert manifest["exit_code"] == 0
        assert manifest["model_hash"] == mm1_model().fingerprint()
        paths = {entry["path"] for entry in manifest["outputs"]}
        assert str(tmp_path / "solution.json") in paths
        assert str(tmp_path / "pmf_departure.csv") in paths
        assert manifest["config"]["settings"]["mean_rtol"] > 0

    def test_malformed_weights(self, tmp_path, caplog):
        document = mm1_model().document()
        document["G"][0][0]["weight"] = 0.9
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(document))
        assert _run(["solve", "--model", str(path)], tmp_path) == 2
        assert "G[0]" in caplog.text
        assert _manifest(tmp_path)["exit_code"] == 2

    def test_missing_model_file(self, tmp_path):
        assert _run(["solve", "--model", str(tmp_path / "absent.json")], tmp_path) == 2

    def test_unstable_model_is_a_solver_error(self, tmp_path, model_file):
        assert _run(["solve", "--model", model_file(mm1_model(lam=1.5))], tmp_path) == 3


class TestHeavyTraffic:
    def test_two_type_rate(self, tmp_path, model_file):
        assert _run(["ht", "--model", model_file(two_type_model(TWO_TYPE_LAMBDA))], tmp_path) == 0
        report = json.loads((tmp_path / "ht.json").read_text())
        assert abs(report["independence_condition"]) < 1e-5
        assert report["eta"] == pytest.approx(2.0 / (report["alphahat_bar"] - 1.0), rel=1e-4)
        assert report["lambda_critical"] == pytest.approx(0.046585, rel=1e-4)

    def test_mm1_rate(self, tmp_path, model_file):
        assert _run(["ht", "--model", model_file(mm1_model())], tmp_path) == 0
        assert json.loads((tmp_path / "ht.json").read_text())["eta"] == pytest.approx(1.0)

    def test_invalid_result_exit_code(self, tmp_path, model_file, monkeypatch):
        result = build_ht_result(1.0, [0.5, 0.5], [0.8, 1.2], 2.0, [1.5, 0.5], [10.0], 0.5)
        monkeypatch.setattr(cli, "ht_report", lambda model: (ht_summary(result), result))
        path = model_file(two_type_model(TWO_TYPE_LAMBDA))
        assert _run(["ht", "--model", path], tmp_path) == 3
        assert json.loads((tmp_path / "ht.json").read_text())["valid"] is False
        assert _run(["ht", "--model", path, "--allow-invalid"], tmp_path) == 0


    def test_normalization_cross_check(self, tmp_path, model_file):
        assert _run(["solve", "--model", model_file(two_type_model(TWO_TYPE_LAMBDA))], tmp_path) == 0
        solution = json.loads((tmp_path / "solution.json").read_text())["solution"]
        assert 0.0 <= solution["normalization_gap"] < 1e-6

    def test_fd_step_from_environment(self, tmp_path, model_file, monkeypatch):
        monkeypatch.setenv("SMQ_FD_STEP", "1e-4")
        get_settings.cache_clear()
        try:
            assert get_settings().fd_step == 1e-4
            assert _run(["solve", "--model", model_file(mm1_model())], tmp_path) == 0
            assert _manifest(tmp_path)["config"]["settings"]["fd_step"] == 1e-4
        finally:
            get_settings.cache_clear()


class TestSweep:
    def test_rho_grid_row(self, tmp_path, model_file):
        code = _run(["sweep", "--model", model_file(two_type_model(TWO_TYPE_LAMBDA)), "--rho-grid", "0.3"], tmp_path)
        assert code == 0
        frame = pd.read_csv(tmp_path / "sweep.csv")
        assert list(frame.columns) == cli.SWEEP_COLUMNS
        row = frame.iloc[0]
        assert row["rho"] == pytest.approx(0.3, rel=1e-10)
        assert row["scaled_mean"] == pytest.approx(0.7 * row["mean_departure"], rel=1e-10)
        # single arrivals: every epoch sees the same law
        assert row["mean_arbitrary"] == pytest.approx(row["mean_departure"], rel=1e-8)

    def test_scaled_mean_matches_solve(self, tmp_path, model_file):
        model = two_type_model(TWO_TYPE_LAMBDA)
        path = model_file(model)
        _run(["sweep", "--model", path, "--lambda-grid", str(TWO_TYPE_LAMBDA)], tmp_path / "sweep")
        _run(["solve", "--model", path], tmp_path / "solve")
        row = pd.read_csv(tmp_path / "sweep" / "sweep.csv").iloc[0]
        means = json.loads((tmp_path / "solve" / "solution.json").read_text())["means"]
        assert row["scaled_mean"] == pytest.approx(means[0]["scaled_mean"], rel=1e-10)

    def test_needs_exactly_one_grid(self, tmp_path, model_file):
        path = model_file(mm1_model())
        assert _run(["sweep", "--model", path], tmp_path) == 2
        assert _run(["sweep", "--model", path, "--rho-grid", "0.5", "--lambda-grid", "0.1"], tmp_path) == 2
        assert _run(["sweep", "--model", path, "--rho-grid", "1.2"], tmp_path) == 2

    def test_failed_points_are_recorded_in_row(self, tmp_path, model_file):
        code = _run(["sweep", "--model", model_file(mm1_model()), "--lambda-grid", "0.5,1.5"], tmp_path)
        assert code == 0
        frame = pd.read_csv(tmp_path / "sweep.csv", keep_default_na=False)
        assert list(frame["index"]) == [0, 1]
        assert frame["error"].iloc[0] == ""
        assert frame["error"].iloc[1].startswith("UnstableModelError")

    def test_simulated_columns_for_every_epoch(self, tmp_path, model_file):
        argv = ["sweep", "--model", model_file(mm1_model()), "--rho-grid", "0.5", "--with-simulation"]
        code = _run(argv + ["--departures", "20000", "--seed", "3"], tmp_path)
        assert code == 0
        row = pd.read_csv(tmp_path / "sweep.csv", keep_default_na=False).iloc[0]
        assert row["error"] == ""
        for epoch in Epoch:
            key = epoch.value.replace("-", "_")
            assert np.isfinite(row[f"sim_mean_{key}"])
            assert row[f"sim_half_width_{key}"] > 0
        assert row["sim_mean_departure"] == pytest.approx(row["mean_departure"], abs=0.3)

    @pytest.mark.slow
    def test_two_type_sweep_with_baseline(self, tmp_path, model_file):
        grid = "0.005,0.01,0.02,0.03,0.04,0.045,0.0465"
        code = _run(["sweep", "--model", model_file(two_type_model(TWO_TYPE_LAMBDA)), "--lambda-grid", grid, "--baseline"], tmp_path)
        assert code == 0
        sweep = pd.read_csv(tmp_path / "sweep.csv")
        baseline = pd.read_csv(tmp_path / "sweep_baseline.csv")
        assert list(baseline.columns) == cli.SWEEP_COLUMNS
        last, base_last = sweep.iloc[-1], baseline.iloc[-1]
        assert last["scaled_mean"] == pytest.approx(last["ht_mean"], rel=0.15)
        assert abs(last["scaled_mean"] - base_last["scaled_mean"]) / last["scaled_mean"] < 0.05


class TestDensity:
    def test_bins_lower_bound(self, tmp_path, model_file):
        path = model_file(two_type_model(TWO_TYPE_LAMBDA))
        assert _run(["density", "--model", path, "--rho", "0.5", "--bins", "5"], tmp_path) == 2

    def test_light_load_is_far_from_the_limit(self, tmp_path, model_file):
        path = model_file(two_type_model(TWO_TYPE_LAMBDA))
        assert _run(["density", "--model", path, "--rho", "0.3", "--bins", "20"], tmp_path) == 0
        frame = pd.read_csv(tmp_path / "density.csv")
        assert list(frame.columns) == cli.DENSITY_COLUMNS
        assert len(frame) == 20
        assert json.loads((tmp_path / "density.json").read_text())["kolmogorov_distance"] > 0.1

    @pytest.mark.slow
    def test_heavy_load_matches_the_limit(self, tmp_path, model_file):
        path = model_file(two_type_model(TWO_TYPE_LAMBDA))
        assert _run(["density", "--model", path, "--rho", "0.99"], tmp_path) == 0
        summary = json.loads((tmp_path / "density.json").read_text())
        assert summary["kolmogorov_distance"] < 0.05
        frame = pd.read_csv(tmp_path / "density.csv")
        assert np.all(np.diff(frame["cdf"]) >= 0)


@pytest.mark.slow
class TestCompare:
    def test_mm1_passes(self, tmp_path, model_file):
        assert _run(["compare", "--model", model_file(mm1_model()), "--departures", "1000000"], tmp_path) == 0
        report = json.loads((tmp_path / "compare.json").read_text())
        assert report["passed"] is True
        assert all(row["total_variation"] < 0.005 for row in report["epochs"])

    def test_corrupted_pmf_fails(self, tmp_path, model_file):
        def corrupt(epoch, pmf):
            if epoch != Epoch.DEPARTURE:
                return pmf
            probabilities = pmf.probabilities.copy()
            probabilities[1] *= 1.1
            return type(pmf)(probabilities=probabilities, tail=pmf.tail, epoch=pmf.epoch)

        code = _run(["compare", "--model", model_file(mm1_model()), "--departures", "1000000"], tmp_path, pmf_hook=corrupt)
        assert code == 3
        report = json.loads((tmp_path / "compare.json").read_text())
        assert report["failed_epochs"] == ["departure"]

    def test_simulate_exports(self, tmp_path, model_file):
        assert _run(["simulate", "--model", model_file(mm1_model()), "--departures", "20000"], tmp_path) == 0
        frame = pd.read_csv(tmp_path / "sim_customer-arrival.csv")
        assert list(frame.columns) == SIM_COLUMNS
        summary = json.loads((tmp_path / "simulation.json").read_text())
        assert summary["seed"] == 42
