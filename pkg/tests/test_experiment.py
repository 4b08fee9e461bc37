"""Experiment harness: error metrics, sweep mechanics, determinism."""

import os

import numpy as np
import pytest

from plg import experiment, model
from plg.errors import DimensionMismatch
from plg.experiment import (CellResult, ExperimentConfig, param_l1_error,
                            run_experiment)
from plg.model import PlgParams

from _util import random_plg

SMALL = dict(n=2, trace_len=12, k_grid=(10, 50), seeds=(3, 4, 5))


def _read_all(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestParamL1Error:
    def test_identical_is_zero(self):
        truth = random_plg(3, 1)
        assert param_l1_error(truth, truth) == 0.0

    def test_scalar_unit_difference(self):
        a = PlgParams([0.0], [[1.0]], [0.0], [0.0], 1.0)
        b = PlgParams([1.0], [[1.0]], [0.0], [0.0], 1.0)
        assert param_l1_error(b, a) == pytest.approx(0.2)

    def test_symmetric(self):
        a, b = random_plg(2, 2), random_plg(2, 3)
        assert param_l1_error(a, b) == param_l1_error(b, a)

    def test_counts_distinct_covariance_entries_once(self):
        a = random_plg(2, 4)
        bumped = PlgParams(a.mu0, a.Sigma0 + np.ones((2, 2)), a.g, a.C,
                           a.sigma2)
        # 3 distinct covariance entries moved by 1, over 10 parameters
        assert param_l1_error(bumped, a) == pytest.approx(3 / 10)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            param_l1_error(random_plg(2, 5), random_plg(3, 6))


class TestConfig:
    def test_empty_k_grid_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=2, trace_len=12, k_grid=(), seeds=(1,))

    def test_unsorted_k_grid_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=2, trace_len=12, k_grid=(50, 10), seeds=(1,))

    def test_short_traces_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=4, trace_len=6, k_grid=(10,), seeds=(1,))

    def test_from_dict_defaults_trace_len(self):
        cfg = ExperimentConfig.from_dict(
            {"n": 3, "k_grid": [10], "seeds": [1]})
        assert cfg.trace_len == 30

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(
                {"n": 2, "k_grid": [10], "seeds": [1], "bogus": 0})


class TestRunExperiment:
    def test_cells_cover_grid(self):
        report = run_experiment(ExperimentConfig(**SMALL))
        assert len(report.cells) == 6
        got = {(c.seed, c.num_traces) for c in report.cells}
        assert got == {(s, k) for s in (3, 4, 5) for k in (10, 50)}
        for cell in report.cells:
            assert cell.l1_param_error >= 0.0
            assert np.isfinite(cell.loglik_error)
            assert cell.reason == ""

    def test_self_comparison_is_exactly_zero(self):
        truth = random_plg(2, 11)
        corpus = model.sample_traces(truth, 10, 20,
                                     np.random.default_rng(0))
        l_a = float(np.sum(model.loglik_batch(truth, corpus)))
        l_t = float(np.sum(model.loglik_batch(truth, corpus)))
        assert (l_t - l_a) / 20 == 0.0
        assert param_l1_error(truth, truth) == 0.0

    def test_outputs_written_and_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_experiment(ExperimentConfig(**SMALL, output_dir=str(out1)))
        run_experiment(ExperimentConfig(**SMALL, output_dir=str(out2)))
        files1, files2 = _read_all(out1), _read_all(out2)
        assert set(files1) == {"report.csv", "verdicts.json",
                               "plotdata_abs_loglik_error.csv",
                               "plotdata_l1_param_error.csv"}
        assert files1 == files2

    def test_parallel_execution_is_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        run_experiment(ExperimentConfig(**SMALL, output_dir=str(out1)))
        run_experiment(ExperimentConfig(**SMALL, output_dir=str(out2),
                                        workers=2))
        assert _read_all(out1) == _read_all(out2)

    def test_lds_trace_source(self):
        cfg = ExperimentConfig(**SMALL, trace_source="lds")
        report = run_experiment(cfg)
        assert len(report.cells) == 6
        assert all(np.isfinite(c.l1_param_error) for c in report.cells)

    def test_degenerate_learned_model_becomes_nan_cell(self, monkeypatch):
        from plg.learn import CeDiagnostics

        def broken_learn(ts, clip_sigma0=False):
            params = PlgParams(np.zeros(2), np.zeros((2, 2)), np.zeros(2),
                               np.zeros(2), 0.0)
            return params, CeDiagnostics(float("inf"), False, True)

        monkeypatch.setattr(experiment, "ce_learn", broken_learn)
        report = run_experiment(ExperimentConfig(**SMALL))
        for cell in report.cells:
            assert np.isnan(cell.loglik_error)
            assert cell.reason.startswith("degenerate_variance_t")
            assert np.isfinite(cell.l1_param_error)

    def test_verdict_structure(self):
        report = run_experiment(ExperimentConfig(**SMALL))
        verdicts = report.verdicts()
        assert verdicts["k_grid"] == [10, 50]
        for key in ("abs_loglik_error", "l1_param_error"):
            block = verdicts["metrics"][key]
            assert len(block["medians"]) == 2
            assert isinstance(block["strictly_decreasing"], bool)
            assert 0.0 <= block["improved_fraction"] <= 1.0


class TestReportAccessors:
    def test_metric_ordering_follows_seed_order(self):
        cells = (CellResult(5, 10, 0.1, 0.2, 1.0, True, False),
                 CellResult(3, 10, 0.3, 0.4, 1.0, True, False))
        cfg = ExperimentConfig(n=2, trace_len=12, k_grid=(10,), seeds=(5, 3))
        report = experiment.ExperimentReport(cfg, cells)
        assert np.array_equal(report.metric("loglik_error", 10), [0.1, 0.3])
