import inspect
import math

import pytest

from app.core.config import Settings
from app.core.errors import ConfigError, UnknownExperimentError
from app.experiments.icl import ICLParams
from app.experiments.router import experiment_router
from app.experiments.runner import load_config, parse_config, run_experiment
from app.external.csv_io import read_csv
from app.services.icl import icl_service
from main import main


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestSettings:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("POLYTRANSFER_GOTU_THRESHOLD", "0.4")
        monkeypatch.setenv("POLYTRANSFER_ICL_EXPONENT", "3")
        fresh = Settings()
        assert fresh.GOTU_THRESHOLD == 0.4
        assert fresh.ICL_EXPONENT == 3

    def test_defaults(self):
        assert Settings().RATIO_GRID_POINTS == 2001


class TestConfig:
    def test_parse(self):
        config = parse_config({"experiment": "gotu", "seed": "3", "gotu.n": "10", "gotu.scaling_ns": "5,10"})
        assert config.name == "gotu"
        assert config.seed == 3
        assert config.params == {"n": "10", "scaling_ns": "5,10"}

    def test_missing_experiment(self):
        with pytest.raises(ConfigError) as caught:
            parse_config({"seed": "1"})
        assert caught.value.key == "experiment"

    def test_foreign_section(self):
        with pytest.raises(ConfigError) as caught:
            parse_config({"experiment": "gotu", "fig1.degree": "3"})
        assert caught.value.key == "fig1.degree"

    def test_bad_seed(self):
        with pytest.raises(ConfigError) as caught:
            parse_config({"experiment": "gotu", "seed": "many"})
        assert caught.value.key == "seed"

    def test_load_file(self, tmp_path):
        path = write_config(tmp_path, "experiment = fig1\nseed = 2\n# comment\nfig1.degree = 5\n")
        config = load_config(path)
        assert (config.name, config.seed, config.params) == ("fig1", 2, {"degree": "5"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.conf")

    def test_unknown_parameter(self, output_root):
        config = parse_config({"experiment": "gaussian1d-coeffs", "gaussian1d-coeffs.bogus": "1"})
        with pytest.raises(ConfigError) as caught:
            run_experiment(config)
        assert caught.value.key == "gaussian1d-coeffs.bogus"

    def test_bad_shift_kind(self, output_root):
        config = parse_config({"experiment": "icl-shift", "icl-shift.shift_kinds": "task,labels"})
        with pytest.raises(ConfigError) as caught:
            run_experiment(config)
        assert caught.value.key.startswith("icl-shift.shift_kinds")

    def test_icl_training_length_default(self):
        default = inspect.signature(icl_service.train_lsa).parameters["steps"].default
        assert ICLParams().steps == default == 20_000

    def test_unknown_experiment(self, output_root):
        with pytest.raises(UnknownExperimentError) as caught:
            run_experiment(parse_config({"experiment": "fig9"}))
        assert "fig1" in caught.value.known


class TestMain:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        names = ("fig1", "fig2", "gaussian1d-coeffs", "transfer-ensemble", "truncated", "boolean-transfer", "gotu")
        for name in names + ("icl-shift",):
            assert name in out
        assert set(experiment_router.names) >= {"fig1", "gotu", "icl-shift"}

    def test_unknown_experiment_exit_code(self, tmp_path, output_root, capsys):
        assert main(["run", str(write_config(tmp_path, "experiment = fig9\n"))]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err
        assert "available experiments" in err

    def test_missing_config_exit_code(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.conf")]) == 2

    def test_gaussian_coefficients(self, tmp_path, output_root):
        path = write_config(tmp_path, "experiment = gaussian1d-coeffs\ngaussian1d-coeffs.mus = 0, 2\n")
        assert main(["run", str(path)]) == 0
        out_dir = output_root / "gaussian1d-coeffs"
        rows = read_csv(out_dir / "gaussian1d_coefficients.csv")
        assert list(rows[0]) == [
            "mu",
            "direct_ratio_lowerbound",
            "bridge_coefficient",
            "bridge_ratio_sup",
            "bridge_normalizer",
        ]
        assert [float(r["mu"]) for r in rows] == [0.0, 2.0]
        assert float(rows[0]["bridge_coefficient"]) == 1.0
        normalizer = 1 + 2 / math.sqrt(2 * math.pi)
        assert float(rows[1]["direct_ratio_lowerbound"]) == pytest.approx(math.exp(2.0))
        assert float(rows[1]["bridge_normalizer"]) == pytest.approx(normalizer)
        assert float(rows[1]["bridge_coefficient"]) == pytest.approx(normalizer**2)
        assert float(rows[1]["bridge_ratio_sup"]) == pytest.approx(normalizer, rel=1e-3)
        resolved = (out_dir / "resolved.conf").read_text()
        assert "gaussian1d-coeffs.mus = 0.0,2.0" in resolved

    def test_rerun_from_resolved_config(self, tmp_path, output_root):
        path = write_config(tmp_path, "experiment = gaussian1d-coeffs\ngaussian1d-coeffs.mus = 1\n")
        first = run_experiment(load_config(path))
        resolved = first.output_dir / "resolved.conf"
        assert "output_dir = gaussian1d-coeffs" in resolved.read_text().splitlines()
        second = run_experiment(load_config(resolved))
        assert second.output_dir == first.output_dir == output_root / "gaussian1d-coeffs"
        assert resolved.read_text() == (output_root / "gaussian1d-coeffs" / "resolved.conf").read_text()

    def test_icl_shift_covers_every_kind(self, tmp_path, output_root):
        text = (
            "experiment = icl-shift\nseed = 1\n"
            "icl-shift.N = 5\nicl-shift.steps = 20\nicl-shift.batch_size = 16\n"
            "icl-shift.eval_samples = 500\nicl-shift.shift_mus = 1,2\n"
        )
        assert main(["run", str(write_config(tmp_path, text))]) == 0
        out_dir = output_root / "icl-shift"
        rows = read_csv(out_dir / "icl_shift.csv")
        kinds = [r["shift_kind"] for r in rows]
        assert kinds == ["task"] * 2 + ["query"] * 2 + ["covariate"] * 2 + ["joint"] * 2
        joint = [r for r in rows if r["shift_kind"] == "joint"]
        assert all(r["coefficient"] == "inf" and "joint_shift_needs_bridge" in r["flags"] for r in joint)
        assert all(math.isfinite(float(r["coefficient"])) for r in rows if r["shift_kind"] != "joint")
        assert "icl-shift.shift_kinds = task,query,covariate,joint" in (out_dir / "resolved.conf").read_text()

    def test_fixed_seed_reproduces_artifacts(self, tmp_path, output_root):
        text = (
            "experiment = gotu\nseed = 5\noutput_dir = {}\n"
            "gotu.n = 8\ngotu.T = 1.0\ngotu.record_every = 100\n"
            "gotu.scaling_ns = 4,8\ngotu.scaling_seeds = 2\n"
        )
        for run in ("a", "b"):
            assert main(["run", str(write_config(tmp_path, text.format(run), f"{run}.conf"))]) == 0
        for name in ("gotu_trace.csv", "gotu_scaling.csv", "resolved.conf"):
            first = (output_root / "a" / name).read_text().splitlines()
            second = (output_root / "b" / name).read_text().splitlines()
            if name == "resolved.conf":
                first = [line for line in first if not line.startswith("output_dir")]
                second = [line for line in second if not line.startswith("output_dir")]
            assert first == second
        header = (output_root / "a" / "gotu_trace.csv").read_text().splitlines()[0]
        assert header == "t,L_S,L,tau,fhat_k"

    @pytest.mark.slow
    def test_fig1_polynomial_extrapolates_better(self, tmp_path, output_root):
        result = run_experiment(parse_config({"experiment": "fig1", "seed": "0", "fig1.resolution": "50"}))
        summary = result.summary
        assert summary["polynomial_seen_mse"] <= 1e-3
        assert summary["polynomial_near_mse"] <= 0.5 * summary["relu_net_near_median_mse"]
        assert (output_root / "fig1" / "region_mse.csv").is_file()
        assert (output_root / "fig1" / "heatmap_polynomial.svg").is_file()
