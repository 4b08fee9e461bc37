"""File formats: model parameter JSON, trace CSV, and precise JSON emission.

All real numbers are written with 17 significant decimal digits, which
round-trips IEEE doubles exactly, so write/read cycles are bit-preserving.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .lds import LdsParams
from .model import PlgParams


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips doubles exactly."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _emit(obj, indent: int, level: int) -> str:
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit(v, indent, level) for v in obj) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        pad = " " * (indent * (level + 1))
        closer = " " * (indent * level)
        rows = (f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}"
                for k, v in obj.items())
        return "{\n" + ",\n".join(rows) + "\n" + closer + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    return _emit(obj, indent, 0) + "\n"


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def plg_to_dict(params: PlgParams) -> dict:
    return {
        "n": params.n,
        "mu0": params.mu0,
        "Sigma0": params.Sigma0.ravel(),
        "g": params.g,
        "C": params.C,
        "sigma2": params.sigma2,
    }


def plg_from_dict(d: dict) -> PlgParams:
    n = int(d["n"])
    return PlgParams(
        np.asarray(d["mu0"], dtype=float),
        np.asarray(d["Sigma0"], dtype=float).reshape(n, n),
        np.asarray(d["g"], dtype=float),
        np.asarray(d["C"], dtype=float),
        float(d["sigma2"]),
    )


def lds_to_dict(params: LdsParams) -> dict:
    return {
        "n": params.n,
        "A": params.A.ravel(),
        "H": params.H,
        "Q": params.Q.ravel(),
        "R": params.R,
        "x1hat": params.x1hat,
        "P1": params.P1.ravel(),
    }


def lds_from_dict(d: dict) -> LdsParams:
    n = int(d["n"])
    return LdsParams(
        np.asarray(d["A"], dtype=float).reshape(n, n),
        np.asarray(d["H"], dtype=float),
        np.asarray(d["Q"], dtype=float).reshape(n, n),
        float(d["R"]),
        np.asarray(d["x1hat"], dtype=float),
        np.asarray(d["P1"], dtype=float).reshape(n, n),
    )


def save_model(params, path) -> None:
    """Write either parameter set as JSON (matrices row-major)."""
    if isinstance(params, PlgParams):
        dump_json(plg_to_dict(params), path)
    elif isinstance(params, LdsParams):
        dump_json(lds_to_dict(params), path)
    else:
        raise TypeError(f"cannot serialize {type(params).__name__}")


def load_model(path):
    """Read a model JSON, detecting the kind from its keys."""
    d = load_json(path)
    if "A" in d:
        return lds_from_dict(d)
    if "g" in d:
        return plg_from_dict(d)
    raise ValueError(f"{path}: not a recognized model file")


def write_traces(traces, path) -> None:
    """Trace corpus CSV with header ``trace,t,y``, rows sorted by (trace, t).

    Trace and step indices are 0-based; values use 17 significant digits.
    """
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    with open(path, "w") as fh:
        fh.write("trace,t,y\n")
        for k in range(traces.shape[0]):
            row = traces[k]
            for t in range(traces.shape[1]):
                fh.write(f"{k},{t},{format_float(row[t])}\n")


def read_traces(path) -> np.ndarray:
    """Read a trace CSV back into a (num_traces, trace_len) array.

    Rows may arrive in any order; the (trace, t) indices place each value.
    Missing or duplicated cells raise ``ValueError``.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: no trace rows")
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, found {data.shape[1]}")
    trace_idx = data[:, 0].astype(int)
    step_idx = data[:, 1].astype(int)
    num_traces = int(trace_idx.max()) + 1
    trace_len = int(step_idx.max()) + 1
    if trace_idx.min() < 0 or step_idx.min() < 0 \
            or data.shape[0] != num_traces * trace_len:
        raise ValueError(f"{path}: trace grid is not complete")
    out = np.full((num_traces, trace_len), np.nan)
    out[trace_idx, step_idx] = data[:, 2]
    if np.any(np.isnan(out)):
        raise ValueError(f"{path}: trace grid has missing cells")
    return out
