"""File formats: exact float round-trips, model JSON, trace CSV."""

import json

import numpy as np
import pytest

from plg import fileio
from plg.fileio import (dumps_json, format_float, load_model, read_traces,
                        save_model, write_traces)

from _util import random_plg, random_system


class TestFormatFloat:
    def test_round_trips_exactly(self):
        rng = np.random.default_rng(0)
        values = np.concatenate([
            rng.standard_normal(1000),
            10.0 ** rng.uniform(-300, 300, 1000) * np.sign(
                rng.standard_normal(1000)),
            [0.0, -0.0, 1e-308, 2.2250738585072014e-308],
        ])
        for x in values:
            assert float(format_float(x)) == x

    def test_negative_zero_keeps_sign(self):
        assert np.signbit(float(format_float(-0.0)))

    def test_non_finite_spelled_out(self):
        assert format_float(float("nan")) == "NaN"
        assert format_float(float("inf")) == "Infinity"
        assert format_float(float("-inf")) == "-Infinity"


class TestJsonEmission:
    def test_parseable_and_deterministic(self):
        obj = {"a": 1, "b": [1.5, -2.25, 1e-17], "c": {"d": True, "e": None},
               "f": "text", "g": np.arange(3.0)}
        text = dumps_json(obj)
        assert text == dumps_json(obj)
        parsed = json.loads(text)
        assert parsed["b"] == [1.5, -2.25, 1e-17]
        assert parsed["c"] == {"d": True, "e": None}
        assert parsed["g"] == [0.0, 1.0, 2.0]

    def test_non_finite_parseable(self):
        parsed = json.loads(dumps_json({"x": float("nan"),
                                        "y": float("inf")}))
        assert np.isnan(parsed["x"]) and np.isposinf(parsed["y"])


class TestModelJson:
    def test_plg_round_trip_bit_identical(self, tmp_path):
        params = random_plg(3, 5)
        path = tmp_path / "plg.json"
        save_model(params, path)
        got = load_model(path)
        for name in ("mu0", "Sigma0", "g", "C"):
            assert np.array_equal(getattr(got, name), getattr(params, name))
        assert got.sigma2 == params.sigma2

    def test_lds_round_trip_bit_identical(self, tmp_path):
        params = random_system(3, 6)
        path = tmp_path / "lds.json"
        save_model(params, path)
        got = load_model(path)
        for name in ("A", "H", "Q", "x1hat", "P1"):
            assert np.array_equal(getattr(got, name), getattr(params, name))
        assert got.R == params.R

    def test_kind_detection(self, tmp_path):
        from plg.lds import LdsParams
        from plg.model import PlgParams
        save_model(random_plg(2, 7), tmp_path / "a.json")
        save_model(random_system(2, 8), tmp_path / "b.json")
        assert isinstance(load_model(tmp_path / "a.json"), PlgParams)
        assert isinstance(load_model(tmp_path / "b.json"), LdsParams)

    def test_unrecognized_file_rejected(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"foo": 1}')
        with pytest.raises(ValueError):
            load_model(path)

    def test_matrices_serialized_row_major(self, tmp_path):
        params = random_system(2, 9)
        save_model(params, tmp_path / "m.json")
        raw = json.loads((tmp_path / "m.json").read_text())
        assert raw["A"] == params.A.ravel().tolist()
        assert len(raw["Q"]) == 4


class TestTraceCsv:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        traces = rng.standard_normal((7, 11)) * 10.0 ** rng.integers(
            -8, 8, (7, 11))
        path = tmp_path / "t.csv"
        write_traces(traces, path)
        assert np.array_equal(read_traces(path), traces)

    def test_header_and_ordering(self, tmp_path):
        path = tmp_path / "t.csv"
        write_traces(np.array([[1.0, 2.0], [3.0, 4.0]]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "trace,t,y"
        assert [line.rsplit(",", 1)[0] for line in lines[1:]] \
            == ["0,0", "0,1", "1,0", "1,1"]

    def test_single_cell(self, tmp_path):
        path = tmp_path / "t.csv"
        write_traces(np.array([[2.5]]), path)
        assert np.array_equal(read_traces(path), [[2.5]])

    def test_row_order_irrelevant_on_read(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("trace,t,y\n1,0,3\n0,1,2\n1,1,4\n0,0,1\n")
        assert np.array_equal(read_traces(path), [[1.0, 2.0], [3.0, 4.0]])

    def test_incomplete_grid_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("trace,t,y\n0,0,1\n1,1,4\n")
        with pytest.raises(ValueError):
            read_traces(path)

    def test_loglik_invariant_through_file_boundary(self, tmp_path):
        from plg import model
        params = random_plg(2, 10)
        traces = model.sample_traces(params, 8, 5, np.random.default_rng(2))
        before = model.loglik_batch(params, traces)
        write_traces(traces, tmp_path / "t.csv")
        after = model.loglik_batch(params, read_traces(tmp_path / "t.csv"))
        assert np.array_equal(before, after)
