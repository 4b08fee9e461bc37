"""Experiment harness: learn models from growing corpora and report errors.

For each system seed, a random system is generated, converted to its exact
window-prediction parameters, and used to sample a trace corpus.  Estimation
then runs on nested prefixes of the corpus, and each cell of the sweep
reports the log-likelihood error per trace, ``(l_learned - l_true) / K``, and
the normalized L1 parameter error.  The whole pipeline is a pure function of
the config: all randomness derives from the declared seeds through a fixed
splitting scheme (system seed -> system draw; its spawn key 1 -> trace
corpus), so reruns and parallel runs are byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass, replace

import numpy as np

from . import convert, lds, model, sysgen
from .errors import DegenerateVariance, DimensionMismatch, PlgError
from .fileio import dump_json, format_float
from .learn import TraceSet, ce_learn
from .model import PlgParams
from .sysgen import GenConfig

OUTPUT_DIR_ENV = "PLG_OUTPUT_DIR"
TRACE_SOURCES = ("plg", "lds")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition.

    n : model dimension
    trace_len : observations per trace (at least 2n; defaults to 10n)
    k_grid : ascending corpus sizes to learn from (each at least 2)
    seeds : system seeds, one independent system per entry
    r_mode : observation-noise convention passed to the generator
    output_dir : where report/verdict/plot files go (None = don't write)
    trace_source : sample the corpus from the converted parameters ("plg",
        default) or from the generating system ("lds") for cross-validation
    workers : worker processes for the seed loop (1 = serial)
    """

    n: int
    trace_len: int
    k_grid: tuple
    seeds: tuple
    r_mode: str = "variance"
    output_dir: str | None = None
    trace_source: str = "plg"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if self.trace_len < 2 * self.n:
            raise ValueError(
                f"trace_len must be at least {2 * self.n} for dimension "
                f"{self.n}")
        if not self.k_grid:
            raise ValueError("k_grid must not be empty")
        if any(k < 2 for k in self.k_grid):
            raise ValueError("every corpus size must be at least 2")
        if list(self.k_grid) != sorted(self.k_grid) \
                or len(set(self.k_grid)) != len(self.k_grid):
            raise ValueError("k_grid must be strictly ascending")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if self.r_mode not in sysgen.R_MODES:
            raise ValueError(f"r_mode must be one of {sysgen.R_MODES}")
        if self.trace_source not in TRACE_SOURCES:
            raise ValueError(f"trace_source must be one of {TRACE_SOURCES}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"n", "trace_len", "k_grid", "seeds", "r_mode", "output_dir",
                 "trace_source", "workers"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "n" not in d or "k_grid" not in d or "seeds" not in d:
            raise ValueError("config requires n, k_grid and seeds")
        n = int(d["n"])
        return cls(
            n=n,
            trace_len=int(d.get("trace_len", 10 * n)),
            k_grid=tuple(d["k_grid"]),
            seeds=tuple(d["seeds"]),
            r_mode=d.get("r_mode", "variance"),
            output_dir=d.get("output_dir"),
            trace_source=d.get("trace_source", "plg"),
            workers=int(d.get("workers", 1)),
        )


@dataclass(frozen=True)
class CellResult:
    """One (seed, corpus size) cell of the sweep."""

    seed: int
    num_traces: int
    loglik_error: float
    l1_param_error: float
    gamma_condition: float
    umt_ok: bool
    psd_violation: bool
    reason: str = ""


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    cells: tuple

    def metric(self, name: str, num_traces: int) -> np.ndarray:
        """Per-seed values of a metric at one corpus size, in seed order."""
        return np.array([getattr(c, name) for c in self.cells
                         if c.num_traces == num_traces])

    def medians(self, name: str, absolute: bool = False) -> np.ndarray:
        values = []
        for k in self.config.k_grid:
            col = self.metric(name, k)
            if absolute:
                col = np.abs(col)
            values.append(float(np.nanmedian(col)))
        return np.array(values)

    def verdicts(self) -> dict:
        """Machine-readable trend checks over the corpus-size sweep."""
        out = {"k_grid": list(self.config.k_grid), "metrics": {}}
        for name, absolute in (("loglik_error", True),
                               ("l1_param_error", False)):
            medians = self.medians(name, absolute=absolute)
            first = self.metric(name, self.config.k_grid[0])
            last = self.metric(name, self.config.k_grid[-1])
            if absolute:
                first, last = np.abs(first), np.abs(last)
            improved = np.less(last, first, where=~(np.isnan(first)
                                                    | np.isnan(last)),
                               out=np.zeros(first.shape, dtype=bool))
            key = "abs_loglik_error" if absolute else name
            out["metrics"][key] = {
                "medians": [float(m) for m in medians],
                "strictly_decreasing": bool(np.all(np.diff(medians) < 0.0)),
                "improved_fraction": float(np.mean(improved)),
            }
        return out


def param_l1_error(learned: PlgParams, truth: PlgParams) -> float:
    """Mean absolute difference per distinct parameter.

    Sums |difference| over the mean window, the upper triangle (diagonal
    included) of the initial covariance, the trend, the noise covariance and
    the noise variance, divided by the total parameter count.
    """
    if learned.n != truth.n:
        raise DimensionMismatch(
            f"cannot compare dimension {learned.n} with {truth.n}")
    iu = np.triu_indices(learned.n)
    total = float(np.sum(np.abs(learned.mu0 - truth.mu0)))
    total += float(np.sum(np.abs(learned.Sigma0[iu] - truth.Sigma0[iu])))
    total += float(np.sum(np.abs(learned.g - truth.g)))
    total += float(np.sum(np.abs(learned.C - truth.C)))
    total += abs(learned.sigma2 - truth.sigma2)
    return total / model.param_count(learned.n)


def trace_rng_for_seed(seed: int) -> np.random.Generator:
    """The corpus generator for a system seed (fixed splitting scheme)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(1,)))


def build_truth(cfg: ExperimentConfig, seed: int):
    """System and converted true parameters for one seed."""
    system = sysgen.random_lds(GenConfig(cfg.n, seed, cfg.r_mode))
    return system, convert.to_plg(system)


def sample_corpus(cfg: ExperimentConfig, seed: int, system, truth) -> np.ndarray:
    """The full (max K, trace_len) corpus for one seed."""
    rng = trace_rng_for_seed(seed)
    if cfg.trace_source == "plg":
        return model.sample_traces(truth, cfg.trace_len, max(cfg.k_grid), rng)
    return lds.sample_traces(system, cfg.trace_len, max(cfg.k_grid), rng)


def _run_seed(args) -> list:
    cfg, seed = args
    system, truth = build_truth(cfg, seed)
    corpus = sample_corpus(cfg, seed, system, truth)
    cells = []
    for k in cfg.k_grid:
        subset = corpus[:k]
        learned, diag = ce_learn(TraceSet(subset, cfg.n))
        l1 = param_l1_error(learned, truth)
        try:
            l_learned = float(np.sum(model.loglik_batch(learned, subset)))
            l_true = float(np.sum(model.loglik_batch(truth, subset)))
            err = (l_learned - l_true) / k
            reason = ""
        except DegenerateVariance as exc:
            err = float("nan")
            reason = f"degenerate_variance_t{exc.t}"
        except PlgError as exc:
            err = float("nan")
            reason = type(exc).__name__
        cells.append(CellResult(seed, k, err, l1, diag.gamma_condition,
                                diag.umt_ok, diag.psd_violation, reason))
    return cells


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the sweep; write report/verdict/plot files when configured.

    Seeds are independent work items; with ``workers > 1`` they run in a
    process pool and are reassembled in config order, so parallel execution
    emits byte-identical files.
    """
    jobs = [(replace(cfg, workers=1), seed) for seed in cfg.seeds]
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(cfg.workers) as pool:
            per_seed = list(pool.map(_run_seed, jobs))
    else:
        per_seed = [_run_seed(job) for job in jobs]
    cells = tuple(cell for group in per_seed for cell in group)
    report = ExperimentReport(cfg, cells)
    if cfg.output_dir is not None:
        write_outputs(report, cfg.output_dir)
    return report


def write_outputs(report: ExperimentReport, output_dir) -> None:
    """Emit report.csv, verdicts.json and plotdata_*.csv."""
    os.makedirs(output_dir, exist_ok=True)
    lines = ["seed,K,loglik_error,l1_param_error,gamma_condition,"
             "umt_ok,psd_violation,reason"]
    for c in report.cells:
        lines.append(",".join([
            str(c.seed), str(c.num_traces), format_float(c.loglik_error),
            format_float(c.l1_param_error), format_float(c.gamma_condition),
            "true" if c.umt_ok else "false",
            "true" if c.psd_violation else "false", c.reason,
        ]))
    with open(os.path.join(output_dir, "report.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    dump_json(report.verdicts(), os.path.join(output_dir, "verdicts.json"))
    for name, absolute in (("abs_loglik_error", True),
                           ("l1_param_error", False)):
        rows = ["K,median,q25,q75"]
        source = "loglik_error" if absolute else name
        for k in report.config.k_grid:
            col = report.metric(source, k)
            if absolute:
                col = np.abs(col)
            med = float(np.nanmedian(col))
            q25 = float(np.nanpercentile(col, 25))
            q75 = float(np.nanpercentile(col, 75))
            rows.append(f"{k},{format_float(med)},{format_float(q25)},"
                        f"{format_float(q75)}")
        path = os.path.join(output_dir, f"plotdata_{name}.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
