"""Estimators, config validation, manifests, and experiment determinism."""

import json
import math

import numpy as np
import pytest
import yaml

import rapwalk as rw
from rapwalk.analytics import gamma_q
from rapwalk.errors import ConfigError, DegenerateInput, InsufficientReplicates
from rapwalk.harness import ExperimentConfig, run
from rapwalk.stats import KS_CRITICAL, covariance_estimate, ks_statistic, scaling_fit


class TestCovarianceEstimate:
    def test_identical_replicates(self):
        x = np.tile([1.0, 2.0, 3.0], (50, 1))
        cov, se = covariance_estimate(x)
        assert np.allclose(cov, 0.0) and np.allclose(se, 0.0)

    def test_perfect_correlation(self, rng):
        a = rng.normal(size=500)
        x = np.stack([a, 2 * a], axis=1)
        cov, se = covariance_estimate(x)
        rho = cov[0, 1] / math.sqrt(cov[0, 0] * cov[1, 1])
        assert rho == pytest.approx(1.0, abs=1e-12)

    def test_recovers_known_gram(self, rng, two_point_constants):
        # synthetic Gaussians with covariance = a Gamma_q Gram matrix
        pts = [(0.5, 0.0), (0.5, 1.0), (1.0, 0.0), (1.0, 1.0)]
        c = two_point_constants
        gram = np.array([[gamma_q(s, q, t, r, c) for (t, r) in pts] for (s, q) in pts])
        chol = np.linalg.cholesky(gram + 1e-14 * np.eye(4))
        reps = 4000
        x = rng.normal(size=(reps, 4)) @ chol.T
        cov, se = covariance_estimate(x)
        z = np.abs(cov - gram) / se
        assert z.max() <= 4.0

    def test_needs_two_replicates(self):
        with pytest.raises(InsufficientReplicates):
            covariance_estimate(np.ones((1, 3)))

    def test_jackknife_matches_moment_formula_for_variance(self, rng):
        # SE of the sample variance via jackknife vs the asymptotic formula
        x = rng.normal(size=(3000, 1))
        cov, se = covariance_estimate(x)
        asymp = cov[0, 0] * math.sqrt(2.0 / (x.shape[0] - 1))
        assert se[0, 0] == pytest.approx(asymp, rel=0.15)


class TestScalingFit:
    def test_exact_power_law(self):
        pairs = [(n, 3.0 * math.sqrt(n)) for n in (10, 100, 1000, 10_000)]
        fit = scaling_fit(pairs)
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
        assert fit.stderr == pytest.approx(0.0, abs=1e-12)

    def test_constant_variances(self):
        fit = scaling_fit([(10, 2.0), (100, 2.0), (1000, 2.0)])
        assert fit.slope == pytest.approx(0.0, abs=1e-14)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateInput):
            scaling_fit([(10, 1.0), (100, 2.0)])
        with pytest.raises(DegenerateInput):
            scaling_fit([(10, 1.0), (100, 0.0), (1000, 2.0)])


class TestKsStatistic:
    def test_null_below_critical(self, rng):
        from scipy.stats import norm

        x = rng.normal(size=10_000)
        res = ks_statistic(x, norm.cdf)
        assert not res.exceeds(0.01)
        assert res.critical[0.01] == pytest.approx(KS_CRITICAL[0.01] / 100.0)

    def test_shifted_detected(self, rng):
        from scipy.stats import norm

        x = rng.normal(size=10_000) + 0.1
        assert ks_statistic(x, norm.cdf).exceeds(0.01)

    def test_constant_samples(self):
        from scipy.stats import norm

        res = ks_statistic(np.full(200, 0.3), norm.cdf)
        expect = max(norm.cdf(0.3), 1 - norm.cdf(0.3))
        assert res.distance == pytest.approx(expect, abs=1e-12)

    def test_needs_samples(self):
        with pytest.raises(DegenerateInput):
            ks_statistic(np.ones(10), lambda x: x)


class TestConfig:
    BASE = {
        "kind": "rwre-cov",
        "law": {"variant": "two_point_beta", "m": 2, "j": 1},
        "n": 100,
        "replicates": 8,
        "grid_t": [0.5],
        "grid_r": [0.0],
        "seed": 5,
    }

    def test_roundtrip(self):
        cfg = ExperimentConfig.from_dict(self.BASE)
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert cfg == again

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({**self.BASE, "replicas": 3})

    def test_bad_kind_rejected(self):
        with pytest.raises(ConfigError, match="kind"):
            ExperimentConfig.from_dict({**self.BASE, "kind": "zzz"})

    def test_se_experiments_need_replicates(self):
        bad = dict(self.BASE)
        bad["replicates"] = 1
        with pytest.raises(ConfigError, match="replicates"):
            ExperimentConfig.from_dict(bad)

    def test_missing_grid_rejected(self):
        bad = {k: v for k, v in self.BASE.items() if k != "grid_t"}
        with pytest.raises(ConfigError, match="grid"):
            ExperimentConfig.from_dict(bad)

    def test_bad_law_named_in_error(self):
        with pytest.raises(ConfigError, match="law"):
            ExperimentConfig.from_dict({**self.BASE, "law": {"variant": "two_point_beta",
                                                             "m": 1, "j": 1}})

    def test_negative_seed_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            ExperimentConfig.from_dict({**self.BASE, "seed": -1})

    def test_yaml_loading(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump(self.BASE))
        assert ExperimentConfig.from_yaml(p) == ExperimentConfig.from_dict(self.BASE)


class TestRunExperiments:
    def test_constants_experiment(self):
        cfg = ExperimentConfig.from_dict({
            "kind": "constants", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
        })
        res = run(cfg)
        c = res.results["constants"]
        assert c["beta"] == pytest.approx(2 / 3, abs=1e-12)
        assert c["kappa"] == pytest.approx(0.5, abs=1e-12)
        assert c["sigma_a2"] == 0.25 and c["V"] == -0.5
        assert c["sigma_D2"] == pytest.approx(1 / 12, abs=1e-12)

    def test_green_experiment(self, tmp_path):
        cfg = ExperimentConfig.from_dict({
            "kind": "green", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "n": 500, "x_points": [0.0, 0.5], "out": str(tmp_path),
        })
        res = run(cfg)
        csvs = list(tmp_path.glob("green_table.csv"))
        assert csvs
        header = csvs[0].read_text().splitlines()[1]
        assert header == "n,x,green,scaled,limit,rel_err"

    def test_scaling_experiment(self):
        cfg = ExperimentConfig.from_dict({
            "kind": "scaling", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "scales": [50, 100, 200], "replicates": 400, "seed": 17,
        })
        res = run(cfg)
        assert 0.3 <= res.results["fit"]["slope"] <= 0.7

    def test_invariance_experiment(self):
        cfg = ExperimentConfig.from_dict({
            "kind": "invariance", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "cases": [{"m": 2, "j": 1, "rate": 1.0}], "steps": 100, "samples": 2000,
        })
        res = run(cfg)
        case = res.results["cases"][0]
        assert case["ks_distance"] <= 1.5 * case["ks_critical_1pct"]

    def test_rap_cov_smoke(self):
        cfg = ExperimentConfig.from_dict({
            "kind": "rap-cov", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "n": 150, "replicates": 60, "grid_t": [0.5, 1.0], "grid_r": [0.0],
            "profile": {"name": "constant", "rho": 1.0, "v": 0.5},
            "seed": 3, "duality_tau": 30,
        })
        res = run(cfg)
        assert res.results["duality_max_rel_err"] <= 1e-9
        assert res.results["rho_bar"] == 1.0 and res.results["v_bar"] == 0.5

    def test_manifest_reproduces_run(self, tmp_path):
        raw = {
            "kind": "rwre-cov", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "n": 120, "replicates": 16, "grid_t": [0.5], "grid_r": [0.0, 1.0], "seed": 7,
        }
        res1 = run(ExperimentConfig.from_dict(raw))
        paths = res1.write(tmp_path / "a")
        manifest = json.loads((tmp_path / "a" / "rwre_cov.json").read_text())["manifest"]
        res2 = run(ExperimentConfig.from_dict(manifest["config"]))
        assert json.dumps(res1.to_json_dict()["results"], sort_keys=True) == json.dumps(
            res2.to_json_dict()["results"], sort_keys=True
        )

    def test_csv_roundtrip_precision(self, tmp_path):
        cfg = ExperimentConfig.from_dict({
            "kind": "rwre-cov", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "n": 64, "replicates": 8, "grid_t": [1.0], "grid_r": [0.0], "seed": 2,
        })
        res = run(cfg)
        res.write(tmp_path)
        lines = (tmp_path / "rwre_cov_values.csv").read_text().splitlines()[2:]
        values = np.array([float(line.split(",")[-1]) for line in lines])
        ys = rw.y_n_samples(rw.TwoPointBeta(2, 1), 64, [(1.0, 0.0)],
                            np.arange(8, dtype=np.uint64) + np.uint64(2))
        assert np.array_equal(values, ys[:, 0])  # 17 sig digits round-trip exactly

    def test_thread_count_does_not_change_results(self):
        raw = {
            "kind": "scaling", "law": {"variant": "two_point_beta", "m": 2, "j": 1},
            "scales": [50, 100, 200], "replicates": 64, "seed": 23,
        }
        r1 = run(ExperimentConfig.from_dict({**raw, "threads": 1}))
        r2 = run(ExperimentConfig.from_dict({**raw, "threads": 8}))
        assert json.dumps(r1.to_json_dict()["results"], sort_keys=True) == json.dumps(
            r2.to_json_dict()["results"], sort_keys=True
        )


class TestCli:
    def test_constants_inline_law(self, capsys):
        from rapwalk.cli import main

        code = main(["constants", "--law", '{"variant": "two_point_beta", "m": 2, "j": 1}'])
        assert code == 0
        out = capsys.readouterr().out
        assert "beta" in out and "0.666666" in out

    def test_kind_mismatch_fails(self, tmp_path, capsys):
        from rapwalk.cli import main

        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump(TestConfig.BASE))
        assert main(["scaling", "--config", str(p)]) == 1

    def test_selftest_subset(self, capsys):
        from rapwalk.cli import main

        code = main(["selftest", "--quick", "--only", "3,5"])
        out = capsys.readouterr().out
        assert code == 0
        assert "ACCEPTANCE  3" in out and "ACCEPTANCE  5" in out

    def test_selftest_failure_exit_code(self, monkeypatch, capsys):
        from rapwalk import acceptance
        from rapwalk.cli import main

        def forced_failure():
            return acceptance.CriterionResult(1, "forced", False, "forced failure", 0.0)

        monkeypatch.setattr(acceptance, "ALL_CRITERIA", (forced_failure,))
        assert main(["selftest"]) == 2
        assert "FAIL" in capsys.readouterr().out
