"""Command-line interface.

Subcommands: gen-system, simulate, convert, learn-ce, eval-loglik,
experiment, bench.  Exit codes: 0 on success, 1 on usage errors (bad
arguments, unreadable files, invalid configs), 2 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import _kernels, convert, experiment, fileio, lds, model, sysgen
from .errors import PlgError
from .learn import TraceSet, ce_learn
from .model import PlgParams
from .sysgen import GenConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_or_print(text: str, path) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_gen_system(args) -> int:
    params = sysgen.random_lds(GenConfig(args.n, args.seed, args.r_mode))
    _write_or_print(fileio.dumps_json(fileio.lds_to_dict(params)), args.out)
    return 0


def _loglik_batch(params, traces) -> np.ndarray:
    if isinstance(params, PlgParams):
        return model.loglik_batch(params, traces)
    return lds.loglik_batch(params, traces)


def _cmd_simulate(args) -> int:
    params = fileio.load_model(args.model)
    rng = np.random.default_rng(args.seed)
    if isinstance(params, PlgParams):
        traces = model.sample_traces(params, args.trace_len,
                                     args.num_traces, rng)
    else:
        traces = lds.sample_traces(params, args.trace_len,
                                   args.num_traces, rng)
    fileio.write_traces(traces, args.out)
    total = float(np.sum(_loglik_batch(params, traces)))
    sys.stdout.write(fileio.dumps_json({"total_loglik": total,
                                        "num_traces": args.num_traces,
                                        "trace_len": args.trace_len}))
    return 0


def _cmd_convert(args) -> int:
    params = fileio.load_model(args.input)
    if isinstance(params, PlgParams):
        raise UsageError(f"{args.input} already holds window-prediction "
                         f"parameters")
    converted = convert.to_plg(params)
    _write_or_print(fileio.dumps_json(fileio.plg_to_dict(converted)), args.out)
    return 0


def _cmd_learn_ce(args) -> int:
    traces = fileio.read_traces(args.traces)
    params, diag = ce_learn(TraceSet(traces, args.n),
                            clip_sigma0=args.clip_sigma0)
    _write_or_print(fileio.dumps_json(fileio.plg_to_dict(params)), args.out)
    diag_text = fileio.dumps_json({
        "gamma_condition": diag.gamma_condition,
        "umt_ok": diag.umt_ok,
        "psd_violation": diag.psd_violation,
    })
    _write_or_print(diag_text, args.diag)
    return 0


def _cmd_eval_loglik(args) -> int:
    params = fileio.load_model(args.model)
    traces = fileio.read_traces(args.traces)
    per_trace = _loglik_batch(params, traces)
    text = fileio.dumps_json({
        "total": float(np.sum(per_trace)),
        "num_traces": traces.shape[0],
        "per_trace": per_trace,
    })
    _write_or_print(text, args.out)
    return 0


def _cmd_experiment(args) -> int:
    try:
        raw = fileio.load_json(args.config)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    try:
        cfg = experiment.ExperimentConfig.from_dict(raw)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    updates = {}
    if args.workers is not None:
        updates["workers"] = args.workers
    if cfg.output_dir is None:
        updates["output_dir"] = args.output_dir \
            or os.environ.get(experiment.OUTPUT_DIR_ENV, ".")
    elif args.output_dir:
        updates["output_dir"] = args.output_dir
    if updates:
        try:
            cfg = experiment.ExperimentConfig(
                **{**cfg.__dict__, **updates})
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    report = experiment.run_experiment(cfg)
    sys.stdout.write(fileio.dumps_json(report.verdicts()))
    return 0


def _time_call(fn, repeats) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _cmd_bench(args) -> int:
    backends = _kernels.available_backends()
    system = sysgen.random_lds(GenConfig(args.n, args.seed))
    params = convert.to_plg(system)
    rng = np.random.default_rng(args.seed)
    normals = rng.standard_normal((args.num_traces, args.trace_len))
    traces = backends["fallback"].plg_sample_batch(
        params.mu0, params.Sigma0, params.g, params.C, params.sigma2, normals)

    cases = {
        "plg_filter": lambda impl: impl.plg_filter_batch(
            params.mu0, params.Sigma0, params.g, params.C, params.sigma2,
            traces),
        "plg_sample": lambda impl: impl.plg_sample_batch(
            params.mu0, params.Sigma0, params.g, params.C, params.sigma2,
            normals),
        "kalman_filter": lambda impl: impl.kalman_filter_batch(
            system.A, system.H, system.Q, system.R, system.x1hat, system.P1,
            traces),
    }
    results = {"active_backend": _kernels.BACKEND,
               "backends": sorted(backends),
               "num_traces": args.num_traces,
               "trace_len": args.trace_len,
               "n": args.n,
               "kernels": {}}
    for name, runner in cases.items():
        entry = {}
        outputs = {}
        for backend, impl in backends.items():
            entry[backend] = {"best_seconds":
                              _time_call(lambda: runner(impl), args.repeats)}
            outputs[backend] = runner(impl)
        if "compiled" in entry:
            entry["speedup"] = (entry["fallback"]["best_seconds"]
                                / entry["compiled"]["best_seconds"])
            ref = np.atleast_1d(outputs["fallback"][0]
                                if isinstance(outputs["fallback"], tuple)
                                else outputs["fallback"])
            got = np.atleast_1d(outputs["compiled"][0]
                                if isinstance(outputs["compiled"], tuple)
                                else outputs["compiled"])
            entry["max_abs_diff"] = float(np.max(np.abs(ref - got)))
        results["kernels"][name] = entry

    if args.json:
        sys.stdout.write(fileio.dumps_json(results))
        return 0
    print(f"kernel backends: {', '.join(sorted(backends))} "
          f"(active: {_kernels.BACKEND})")
    print(f"workload: {args.num_traces} traces x {args.trace_len} steps, "
          f"dimension {args.n}")
    for name, entry in results["kernels"].items():
        line = f"  {name:<14}"
        for backend in sorted(backends):
            ms = entry[backend]["best_seconds"] * 1e3
            line += f" {backend}: {ms:8.3f} ms "
        if "speedup" in entry:
            line += f" speedup: {entry['speedup']:5.1f}x" \
                    f"  max|diff|: {entry['max_abs_diff']:.2e}"
        print(line)
    if "compiled" not in backends:
        print("  (compiled kernels unavailable; showing fallback only)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="plg",
                     description="Predictive linear-Gaussian modeling tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-system", help="draw a random test system")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--r-mode", choices=sysgen.R_MODES, default="variance")
    p.add_argument("-o", "--out", help="output JSON (default: stdout)")
    p.set_defaults(func=_cmd_gen_system)

    p = sub.add_parser("simulate", help="sample traces from a model JSON")
    p.add_argument("model", help="model JSON (either kind)")
    p.add_argument("--trace-len", type=int, required=True)
    p.add_argument("--num-traces", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--out", required=True, help="output traces CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("convert",
                       help="convert a dynamical-system JSON to "
                            "window-prediction parameters")
    p.add_argument("input", help="system JSON")
    p.add_argument("-o", "--out", help="output JSON (default: stdout)")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("learn-ce",
                       help="estimate parameters from a trace CSV")
    p.add_argument("traces", help="traces CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--clip-sigma0", action="store_true",
                   help="floor negative eigenvalues of the learned initial "
                        "covariance at zero")
    p.add_argument("-o", "--out", help="output params JSON (default: stdout)")
    p.add_argument("--diag", help="diagnostics JSON (default: stdout)")
    p.set_defaults(func=_cmd_learn_ce)

    p = sub.add_parser("eval-loglik",
                       help="log-likelihood of traces under a model")
    p.add_argument("model", help="model JSON (either kind)")
    p.add_argument("traces", help="traces CSV")
    p.add_argument("-o", "--out", help="output JSON (default: stdout)")
    p.set_defaults(func=_cmd_eval_loglik)

    p = sub.add_parser("experiment", help="run a config-driven sweep")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output-dir", default=None,
                   help=f"overrides config and ${experiment.OUTPUT_DIR_ENV}")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("bench", help="time the kernel backends")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--num-traces", type=int, default=2000)
    p.add_argument("--trace-len", type=int, default=40)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
