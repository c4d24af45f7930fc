"""End-to-end tests of the command-line interface."""
import json

import pandas as pd
import pytest

from config.manager import StudyConfig, MethodSpec
from core import ParamVector
from geolik import main, SEED_ENV

FIT_FLAGS = ["--max-iter", "300", "--tol", "1e-8"]


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--theta", "0.1,1,0.2", "--n", "40", "--scheme", "uniform",
                 "--seed", "3", "-o", str(out)])
    assert code == 0
    return out / "sites.csv"


def _read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestSimulate:
    def test_writes_sites_and_manifest(self, dataset):
        frame = pd.read_csv(dataset)
        assert list(frame.columns) == ["x", "y", "z"]
        assert len(frame) == 40
        manifest = _read_json(dataset.parent / "manifest.json")
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 3
        assert manifest["outputs"] == [str(dataset)]

    def test_same_seed_same_data(self, tmp_path, dataset):
        main(["simulate", "--theta", "0.1,1,0.2", "--n", "40", "--scheme", "uniform",
              "--seed", "3", "-o", str(tmp_path / "again")])
        pd.testing.assert_frame_equal(pd.read_csv(dataset), pd.read_csv(tmp_path / "again" / "sites.csv"))

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "17")
        assert main(["simulate", "--theta", "0.1,1,0.2", "--n", "10", "-o", str(tmp_path)]) == 0
        assert _read_json(tmp_path / "manifest.json")["seed"] == 17

    def test_bad_theta(self, tmp_path):
        assert main(["simulate", "--theta", "0.1,1", "-o", str(tmp_path)]) == 2

    def test_missing_required_flag(self, tmp_path):
        assert main(["simulate", "-o", str(tmp_path)]) == 2


class TestEstimate:
    def _estimate(self, dataset, out, *extra):
        return main(["estimate", "--data", str(dataset), "--seed", "5", "-o", str(out), *FIT_FLAGS, *extra])

    def test_bicl(self, tmp_path, dataset):
        out = tmp_path / "fit"
        assert self._estimate(dataset, out, "--method", "bicl", "--ds", "0.3", "-C", "2") == 0
        payload = _read_json(out / "estimate.json")
        assert payload["estimator"]["method"] == "bicl"
        assert payload["n"] == 40
        ParamVector.from_dict(payload["theta_hat"])
        assert (out / "partition.json").exists()
        manifest = _read_json(out / "manifest.json")
        assert set(manifest["timings"]) == {"setup", "fit"}
        assert str(dataset) in manifest["inputs"]

    def test_reproducible(self, tmp_path, dataset):
        for name in ("a", "b"):
            assert self._estimate(dataset, tmp_path / name, "--method", "bicl", "--ds", "0.3") == 0
        assert _read_json(tmp_path / "a" / "estimate.json") == _read_json(tmp_path / "b" / "estimate.json")

    @pytest.mark.parametrize("flags", [["--method", "ml"], ["--method", "pcl", "--ds", "0.3"],
                                       ["--method", "bcl", "--blocks", "4"]])
    def test_methods(self, tmp_path, dataset, flags):
        assert self._estimate(dataset, tmp_path / "out", *flags) == 0

    def test_initial_point(self, tmp_path, dataset):
        out = tmp_path / "out"
        assert self._estimate(dataset, out, "--method", "ml", "--init", "0.1,1,0.2", "--max-iter", "1") == 0
        assert _read_json(out / "estimate.json")["iterations"] == 1

    @pytest.mark.parametrize("flags", [["--method", "bicl", "--ds", "0.3", "-C", "2"],
                                       ["--method", "bcl", "--blocks", "4"]])
    def test_partition_replay(self, tmp_path, dataset, flags):
        first = tmp_path / "first"
        assert self._estimate(dataset, first, *flags) == 0
        replay = tmp_path / "replay"
        code = main(["estimate", "--data", str(dataset), "--seed", "99", "-o", str(replay), *FIT_FLAGS,
                     *flags, "--partition", str(first / "partition.json")])
        assert code == 0
        assert _read_json(replay / "estimate.json")["theta_hat"] == _read_json(first / "estimate.json")["theta_hat"]
        assert str(first / "partition.json") in _read_json(replay / "manifest.json")["inputs"]

    def test_partition_replay_errors(self, tmp_path, dataset):
        first = tmp_path / "first"
        assert self._estimate(dataset, first, "--method", "bcl", "--blocks", "4") == 0
        saved = str(first / "partition.json")
        assert self._estimate(dataset, tmp_path / "a", "--method", "bicl", "--ds", "0.3", "--partition", saved) == 2
        assert self._estimate(dataset, tmp_path / "b", "--method", "bcl",
                              "--partition", str(tmp_path / "absent.json")) == 3
        broken = tmp_path / "broken.json"
        broken.write_text('{"centroids": 1}', encoding="utf-8")
        assert self._estimate(dataset, tmp_path / "c", "--method", "bcl", "--partition", str(broken)) == 3

    def test_no_active_pairs(self, tmp_path, dataset):
        assert self._estimate(dataset, tmp_path / "out", "--method", "bicl", "--ds", "0") == 5

    def test_unknown_family(self, tmp_path, dataset):
        assert self._estimate(dataset, tmp_path / "out", "--family", "gaussian", "--ds", "0.3") == 2

    def test_unknown_method(self, tmp_path, dataset):
        assert self._estimate(dataset, tmp_path / "out", "--method", "kriging") == 2

    def test_missing_ds(self, tmp_path, dataset):
        assert self._estimate(dataset, tmp_path / "out", "--method", "pcl") == 2

    def test_missing_file(self, tmp_path):
        assert main(["estimate", "--data", str(tmp_path / "absent.csv"), "-o", str(tmp_path / "out")]) == 3

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        assert main(["estimate", "--data", str(path), "-o", str(tmp_path / "out")]) == 3


class TestOtherCommands:
    def test_bootstrap(self, tmp_path, dataset):
        out = tmp_path / "boot"
        code = main(["bootstrap", "--data", str(dataset), "--method", "pcl", "--ds", "0.3",
                     "--theta", "0.1,1,0.2", "-B", "3", "--threads", "1", "--seed", "2",
                     "-o", str(out), *FIT_FLAGS])
        assert code == 0
        assert len(pd.read_csv(out / "bootstrap.csv")) == 3
        assert set(_read_json(out / "bootstrap.json")["standard_errors"]) == {"tau2", "sigma2", "range"}

    def test_variogram(self, tmp_path, dataset):
        out = tmp_path / "vario"
        assert main(["variogram", "--data", str(dataset), "--bins", "5", "--theta", "0.1,1,0.2",
                     "-o", str(out)]) == 0
        assert len(pd.read_csv(out / "variogram.csv")) == 5
        model = pd.read_csv(out / "variogram_model.csv")
        assert list(model.columns) == ["h", "gamma_model"]

    def test_krige_loo(self, tmp_path, dataset):
        out = tmp_path / "loo"
        assert main(["krige-loo", "--data", str(dataset), "--theta", "0.1,1,0.2", "--subsample", "5",
                     "--seed", "1", "-o", str(out)]) == 0
        payload = _read_json(out / "loo.json")
        assert payload["folds"] == 5
        assert payload["rmse"] > 0

    def test_bench_timing(self, tmp_path):
        out = tmp_path / "bench"
        assert main(["bench-timing", "--n", "32,64", "--ds", "0.3", "--seed", "1", "-o", str(out)]) == 0
        assert list(pd.read_csv(out / "timing.csv")["n"]) == [32, 64]

    def test_bench_timing_bad_list(self, tmp_path):
        assert main(["bench-timing", "--n", "32,abc", "-o", str(tmp_path)]) == 2


class TestStudyCommand:
    def test_config_file(self, tmp_path):
        path = tmp_path / "study.yaml"
        StudyConfig(
            name="cli",
            family="exponential",
            theta_true=ParamVector(0.1, 1.0, 0.1),
            n=20,
            replicates=3,
            site_scheme="uniform",
            max_iterations=300,
            tolerance=1e-8,
            methods=[MethodSpec("ml", "ml"), MethodSpec("pcl", "pcl", ds=0.4)],
        ).save(path)
        out = tmp_path / "study"
        assert main(["mc-study", "--config", str(path), "--threads", "1", "--seed", "9", "-o", str(out)]) == 0
        summary = _read_json(out / "summary.json")
        assert summary["replicates_kept"] == 3
        assert _read_json(out / "manifest.json")["seed"] == 9
        assert list(pd.read_csv(out / "efficiency.csv")["parameter"]) == ["sigma2", "range", "tau2", "global"]

    def test_named_config_created_on_demand(self, tmp_path):
        config_dir = tmp_path / "configs"
        out = tmp_path / "smoke"
        code = main(["mc-study", "--config", "smoke", "--config-dir", str(config_dir),
                     "--replicates", "2", "--threads", "1", "-o", str(out)])
        assert code == 0
        assert (config_dir / "smoke.json").exists()
        assert _read_json(out / "summary.json")["replicates_kept"] == 2

    def test_unknown_named_config(self, tmp_path):
        code = main(["mc-study", "--config", "nonexistent", "--config-dir", str(tmp_path / "c"),
                     "-o", str(tmp_path / "o")])
        assert code == 2
