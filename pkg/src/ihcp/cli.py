"""Command-line entry point: ``ihcp <command> --config FILE``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
(divergence, singular system, unstable configuration).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .direct import FluxSchedule, IntegratorConfig, simulate
from .errors import ConfigError, IHCPError, InvalidArgumentError
from .inverse import InverseModel
from .ridge import morozov_select
from .stability import select_beta

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("ihcp")


def _load(args) -> bench.ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        cfg = bench.load_config(Path(args.config))
    elif args.preset:
        cfg = bench.preset(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = bench.write_text(Path(args.out) / name, text)
    log.info("wrote %s", path)


def _fmt(args, default: str) -> str:
    return args.format or default


def _load_measurements(path, num_sensors):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read measurements {path}: {exc}") from None
    if data.shape[1] != num_sensors + 1:
        raise ConfigError(
            f"{path}: expected time + {num_sensors} sensor columns, "
            f"got {data.shape[1]} columns")
    return data[:, 0], data[:, 1:]


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_direct(args) -> int:
    cfg = _load(args)
    exp = bench.build_experiment(cfg)
    q = cfg.truth_flux()
    T0 = cfg.material_properties().initial_temp
    beta = cfg.integrator.beta if args.beta is None else args.beta
    T = simulate(exp.system, IntegratorConfig(beta, cfg.dt), FluxSchedule(q),
                 T0, cfg.num_steps)
    if _fmt(args, "csv") == "json":
        _emit(args, "direct.json", json.dumps(
            {"time": cfg.times.tolist(), "temperature": T.tolist(),
             "flux": q.tolist()}))
        return EXIT_OK
    cols = {f"T{i}": T[:, i] for i in range(T.shape[1])}
    _emit(args, "temperature.csv", bench.array_to_csv(cfg.times, cols))
    if args.out is not None:
        qcols = {f"q{j + 1}": q[:, j] for j in range(q.shape[1])}
        _emit(args, "flux.csv", bench.array_to_csv(cfg.times, qcols))
    return EXIT_OK


def cmd_inverse(args) -> int:
    cfg = _load(args)
    exp = bench.build_experiment(cfg)
    beta = cfg.integrator.beta if args.beta is None else args.beta
    if args.measurements:
        t, Y = _load_measurements(args.measurements, exp.selector.num_sensors)
        times = np.concatenate([[t[0] - cfg.dt], t])
        truth = None
    else:
        series = bench.synthesize_measurements(cfg, exp)
        Y, times, truth = series.values, series.times, series.truth_flux
    model = InverseModel(exp.system, exp.selector, beta, cfg.dt)
    res = model.run(Y, args.alpha, T0=cfg.material_properties().initial_temp)
    cols = {f"q{j + 1}": res.flux[:, j] for j in range(res.flux.shape[1])}
    if truth is not None:
        cols.update({f"q{j + 1}_true": truth[:, j]
                     for j in range(truth.shape[1])})
    Ts = exp.selector.extract(res.temperature)
    cols.update({f"T_sensor{i + 1}": Ts[:, i] for i in range(Ts.shape[1])})
    if _fmt(args, "csv") == "json":
        _emit(args, "inverse.json", json.dumps(
            {"alpha": args.alpha, "beta": beta, "time": list(map(float, times)),
             **{k: np.asarray(v).tolist() for k, v in cols.items()}}))
    else:
        _emit(args, "inverse.csv", bench.array_to_csv(times, cols))
    return EXIT_OK


def cmd_select_alpha(args) -> int:
    cfg = _load(args)
    exp = bench.build_experiment(cfg)
    T0 = cfg.material_properties().initial_temp
    t0 = time.perf_counter()
    out: dict = {"method": args.method}
    if args.method == "fast":
        sel = bench.select_fast_alpha(cfg, exp, beta=args.beta)
        out.update(alpha=sel.alpha, total_error=sel.total_error,
                   evaluations=sel.evaluations)
    else:
        series = bench.synthesize_measurements(cfg, exp)
        model = InverseModel(exp.system, exp.selector, 1.0, cfg.dt)
        if args.method == "morozov":
            r = morozov_select(series.values,
                               cfg.selection.morozov_grid.values(),
                               cfg.noise.sigma, model, T0)
            out.update(alpha=r.alpha, target=r.target, crossed=r.crossed,
                       warning=r.warning, alphas=r.alphas.tolist(),
                       residuals=[None if not np.isfinite(x) else float(x)
                                  for x in r.residuals])
        else:
            a, errs = bench.reference_alpha(
                series, model, cfg.selection.reference_grid.values(), T0)
            out.update(alpha=a, alphas=cfg.selection.reference_grid
                       .values().tolist(),
                       errors=[None if not np.isfinite(x) else float(x)
                               for x in errs])
    out["cost"] = time.perf_counter() - t0
    if _fmt(args, "json") == "csv":
        _emit(args, "alpha.csv", f"method,alpha,cost\n{args.method},"
              f"{out['alpha']!r},{out['cost']!r}\n")
    else:
        _emit(args, "alpha.json", json.dumps(out, indent=2))
    return EXIT_OK


def cmd_select_beta(args) -> int:
    cfg = _load(args)
    exp = bench.build_experiment(cfg)
    delta = args.delta_beta or cfg.selection.delta_beta
    r = select_beta(args.alpha, delta, exp.system, exp.selector, cfg.dt,
                    beta_start=args.beta_start, diagnostics=True)
    if _fmt(args, "json") == "csv":
        lines = ["beta,gain_norm,rho_EA,rho_EU"]
        lines += [",".join(repr(float(x)) for x in row) for row in r.trace]
        _emit(args, "beta_trace.csv", "\n".join(lines) + "\n")
    else:
        _emit(args, "beta.json", json.dumps(
            {"alpha": args.alpha, "beta": r.beta,
             "exit_reason": r.exit_reason, "gain_norm": r.gain_norm,
             "rho_EA": r.rho_EA,
             "trace": [dict(zip(("beta", "gain_norm", "rho_EA", "rho_EU"),
                                map(float, row))) for row in r.trace]},
            indent=2))
    return EXIT_OK


def cmd_hybrid(args) -> int:
    cfg = _load(args)
    exp = bench.build_experiment(cfg)
    t0 = time.perf_counter()
    r = bench.select_hybrid(cfg, exp)
    d = r.to_dict()
    d["cost"] = time.perf_counter() - t0
    if _fmt(args, "json") == "csv":
        lines = ["iteration,alpha,beta,total_error,gain_norm,rho_EA"]
        lines += [",".join(repr(v) if isinstance(v, float) else str(v)
                           for v in t.values()) for t in d["trace"]]
        _emit(args, "hybrid_trace.csv", "\n".join(lines) + "\n")
    else:
        _emit(args, "hybrid.json", json.dumps(d, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    base = cfg.noise.seed
    seeds = range(base, base + args.seeds)
    methods = tuple(args.methods.split(",")) if args.methods \
        else bench.METHODS
    rows = bench.run_ensemble(cfg, seeds, methods)
    summary = bench.summarize_rows(rows) if args.seeds > 1 else rows
    fmt = _fmt(args, "csv")
    if args.out is None:
        text = bench.rows_to_json(summary) if fmt == "json" \
            else bench.rows_to_csv(summary)
        _emit(args, "", text)
        return EXIT_OK
    _emit(args, "bench.csv", bench.rows_to_csv(rows))
    _emit(args, "bench.json", bench.rows_to_json(rows))
    if args.seeds > 1:
        _emit(args, "bench_summary.csv", bench.rows_to_csv(summary))
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.name is None:
        sys.stdout.write("\n".join(bench.PRESETS) + "\n")
        return EXIT_OK
    cfg = bench.preset(args.name)
    _emit(args, f"{args.name}.yaml", bench.dump_config(cfg))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ihcp",
        description="Sequential inverse heat conduction toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--config", help="experiment YAML file")
        sp.add_argument("--preset", help="built-in experiment name")
        sp.add_argument("--seed", type=int, help="override the noise seed")
        sp.add_argument("--out", help="output directory (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"))

    sp = sub.add_parser("direct", help="forward solve of the configured truth")
    common(sp)
    sp.add_argument("--beta", type=float)
    sp.set_defaults(func=cmd_direct)

    sp = sub.add_parser("inverse", help="inverse solve at given alpha, beta")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--measurements",
                    help="CSV with a time column and one column per sensor;"
                         " synthesized from the config when omitted")
    sp.set_defaults(func=cmd_inverse)

    sp = sub.add_parser("select-alpha", help="choose alpha")
    common(sp)
    sp.add_argument("--method", choices=("fast", "morozov", "reference"),
                    default="fast")
    sp.add_argument("--beta", type=float,
                    help="beta for the fast estimator")
    sp.set_defaults(func=cmd_select_alpha)

    sp = sub.add_parser("select-beta", help="stability-guarded beta search")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--delta-beta", type=float)
    sp.add_argument("--beta-start", type=float, default=1.0)
    sp.set_defaults(func=cmd_select_beta)

    sp = sub.add_parser("hybrid", help="alternating (alpha, beta) selection")
    common(sp)
    sp.set_defaults(func=cmd_hybrid)

    sp = sub.add_parser("bench", help="reference / Morozov / hybrid table")
    common(sp)
    sp.add_argument("--seeds", type=int, default=1,
                    help="ensemble size; seeds start at the config seed")
    sp.add_argument("--methods", help="comma-separated subset of "
                    + ",".join(bench.METHODS))
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("presets", help="list presets or dump one as YAML")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"ihcp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IHCPError as exc:
        print(f"ihcp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # reader went away (e.g. ``| head``); silence the flush at exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
