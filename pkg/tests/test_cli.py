import json
import subprocess
import sys

import numpy as np
import pytest

from isdecode.cli import load_run_config, main
from isdecode.dataset import load_trialset
from isdecode.errors import ParameterError
from isdecode.reduce import read_2d


def synth(path, *extra):
    return main(["synth", "--trials", "200", "--channels", "8", "--samples", "256",
                 "--seed", "1", "-o", str(path), *extra])


def write_config(tmp_path, **over):
    cfg = {"data": "d.isd", "folds": 3, "seed": 0, "report": "r.json",
           "export_2d": "p.csv",
           "pipeline": {"classifier": {"hidden": 6, "epochs": 2}}}
    cfg.update(over)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


class TestSynthInfo:
    def test_synth_shape(self, tmp_path):
        assert synth(tmp_path / "a.isd") == 0
        ts = load_trialset(tmp_path / "a.isd")
        assert list(ts.shape) == [400, 8, 256]
        assert ts.class_counts().tolist() == [200, 200]

    def test_byte_identical(self, tmp_path):
        synth(tmp_path / "a.isd")
        synth(tmp_path / "b.isd")
        assert (tmp_path / "a.isd").read_bytes() == (tmp_path / "b.isd").read_bytes()

    @pytest.mark.parametrize("bad", [["--channels", "0"], ["--trials", "-3"],
                                     ["--fs", "abc"]])
    def test_usage_errors(self, tmp_path, bad):
        with pytest.raises(SystemExit) as e:
            main(["synth", "-o", str(tmp_path / "x.isd"), *bad])
        assert e.value.code == 2

    def test_info(self, tmp_path, capsys):
        synth(tmp_path / "a.isd")
        capsys.readouterr()
        assert main(["info", str(tmp_path / "a.isd")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "400 trials, 8 channels, 256 samples"
        assert "256" in out[1]
        assert [line.split(":")[1].strip() for line in out[2:]] == ["200", "200"]

    def test_truncated_file(self, tmp_path, capsys):
        synth(tmp_path / "a.isd")
        raw = (tmp_path / "a.isd").read_bytes()
        (tmp_path / "t.isd").write_bytes(raw[: len(raw) // 2])
        assert main(["info", str(tmp_path / "t.isd")]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["info", str(tmp_path / "none.isd")]) == 1


class TestRun:
    def test_report(self, tmp_path, capsys):
        main(["synth", "--trials", "15", "--channels", "4", "--samples", "128",
              "-o", str(tmp_path / "d.isd")])
        cfg = write_config(tmp_path)
        assert main(["run", str(cfg)]) == 0
        rep = json.loads((tmp_path / "r.json").read_text())
        assert len(rep["fold_accuracies"]) == 3
        assert rep["config"]["folds"] == 3
        assert "fold_seconds" not in rep
        assert "accuracy" in capsys.readouterr().out

    def test_repeatable(self, tmp_path):
        main(["synth", "--trials", "15", "--channels", "4", "--samples", "128",
              "-o", str(tmp_path / "d.isd")])
        cfg = write_config(tmp_path)
        main(["run", str(cfg), "--report", str(tmp_path / "1.json")])
        main(["run", str(cfg), "--report", str(tmp_path / "2.json"), "--threads", "1"])
        assert (tmp_path / "1.json").read_bytes() == (tmp_path / "2.json").read_bytes()

    def test_csp_on_three_classes(self, tmp_path, capsys):
        main(["synth", "--classes", "3", "--trials", "10", "--channels", "4",
              "--samples", "128", "-o", str(tmp_path / "d.isd")])
        cfg = write_config(tmp_path, pipeline={"features": "csp_variance"})
        assert main(["run", str(cfg)]) == 1
        assert "2-class" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        cfg = write_config(tmp_path, extra=1)
        with pytest.raises(ParameterError):
            load_run_config(cfg)
        assert main(["run", str(cfg)]) == 1

    def test_seed_overrides_pipeline(self, tmp_path):
        cfg = write_config(tmp_path, seed=11, pipeline={"seed": 3})
        rc = load_run_config(cfg)
        assert rc.pipeline.seed == 11 and rc.data == tmp_path / "d.isd"


class TestExport2d:
    def test_rows_and_variances(self, tmp_path):
        main(["synth", "--trials", "20", "--channels", "4", "--samples", "128",
              "-o", str(tmp_path / "d.isd")])
        cfg = write_config(tmp_path)
        assert main(["export2d", str(cfg)]) == 0
        coords, labels = read_2d(tmp_path / "p.csv")
        assert coords.shape == (40, 2)
        assert labels.tolist() == [0] * 20 + [1] * 20

        from isdecode.reduce import pca_fit
        from isdecode.riemann import mean_covariance, tangent_features
        from isdecode.spatial import trial_covariances
        covs = trial_covariances(load_trialset(tmp_path / "d.isd").data, 0.05)
        F = tangent_features(covs, mean_covariance(covs))
        np.testing.assert_allclose(coords.var(axis=0), pca_fit(F, 2).explained_variance,
                                   rtol=1e-9)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "isdecode", "synth", "--channels", "0",
                        "-o", str(tmp_path / "x.isd")], capture_output=True)
    assert r.returncode == 2
