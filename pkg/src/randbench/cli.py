"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fit as fitmod
from . import pulses
from .io import (
    ConfigError,
    curve_to_csv,
    load_config,
    manifest,
    read_curve_csv,
    read_distribution,
    write_json,
)
from .liouville import ValidationError
from .noise import Ideal, RfEnsemble
from . import clifford as cl
from .protocol import computational_sequence, run_multi_qubit_rb, run_single_qubit_rb
from .rf import compare_mc_vs_analytic

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(args, n_qubits_ok):
    spec = load_config(args.config)
    cfg = spec.config
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if not n_qubits_ok(cfg.n_qubits):
        raise ConfigError(f"[experiment] n_qubits={cfg.n_qubits} not valid for this command")
    out = args.out or spec.output
    man = args.manifest or spec.manifest or (f"{out}.manifest.json" if out else None)
    return spec, cfg, out, man


def _run_protocol(args, runner, command, n_qubits_ok) -> int:
    spec, cfg, out, man = _load(args, n_qubits_ok)
    curve = runner(cfg, workers=args.workers)
    _emit(curve_to_csv(curve), out)
    extra = {"points": [
        {"length": int(n), "mean_fidelity": float(m), "std_dev": float(sd), "n_runs": int(k),
         "std_error": float(e)}
        for n, m, sd, k, e in zip(curve.lengths, curve.mean, curve.std, curve.n_runs,
                                  curve.standard_error())
    ]}
    if spec.fit:
        extra["fit"] = _fit_from_spec(curve, spec.fit, cfg.seed).to_dict()
    if man:
        write_json(man, manifest(cfg, command, {"curve_csv": out}, extra))
    return EXIT_OK


def _fit_from_spec(curve, opts: dict, seed: int):
    dim = opts.get("dim", curve.dim)
    if "min_length" in opts:
        curve = curve.select(curve.lengths >= opts["min_length"])
    off = opts.get("fixed_offset", "free")
    fixed = None if off == "free" else (1.0 / dim if off == "1/d" else float(off))
    return fitmod.fit_exponential(curve, dim, fixed_offset=fixed,
                                  n_bootstrap=opts.get("n_bootstrap", 500), seed=seed)


def cmd_single(args) -> int:
    return _run_protocol(args, run_single_qubit_rb, "single", lambda n: n == 1)


def cmd_multi(args) -> int:
    return _run_protocol(args, run_multi_qubit_rb, "multi", lambda n: n >= 2)


def cmd_rf_compare(args) -> int:
    spec, cfg, out, man = _load(args, lambda n: n == 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dist = read_distribution(args.distribution)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not isinstance(cfg.noise, (RfEnsemble, Ideal)):
        raise ConfigError(f"[noise] rf-compare needs model rf_ensemble, got {type(cfg.noise).__name__}")
    cfg = dataclasses.replace(cfg, noise=RfEnsemble(dist))
    report = compare_mc_vs_analytic(dist, cfg, workers=args.workers)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["length", "analytic", "monte_carlo", "std_error", "z"])
    for row in report.rows():
        wr.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    _emit(buf.getvalue(), out)
    summary = {"passed": report.passed, "threshold": report.threshold,
               "max_abs_z": float(np.max(np.abs(report.z))),
               "n_runs": report.n_runs.tolist()}
    if man:
        write_json(man, manifest(cfg, "rf-compare", {"comparison_csv": out}, {"z_report": summary}))
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: max |z| = {summary['max_abs_z']:.3f} (threshold {report.threshold})",
          file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    curve = read_curve_csv(args.csv, args.dim)
    if args.min_length is not None:
        curve = curve.select(curve.lengths >= args.min_length)
    if len(curve.lengths) < fitmod.MIN_LENGTHS:
        raise ConfigError(f"insufficient lengths: {len(curve.lengths)} < {fitmod.MIN_LENGTHS}")
    fixed = None
    if args.fixed_offset is not None:
        fixed = 1.0 / args.dim if args.fixed_offset == "1/D" else float(args.fixed_offset)
    result = fitmod.fit_exponential(curve, args.dim, fixed_offset=fixed,
                                    n_bootstrap=args.n_bootstrap, seed=args.seed or 0)
    if len(curve.lengths) >= fitmod.MIN_LENGTHS_SELECT:
        result.model = fitmod.model_select(curve, args.dim, seed=args.seed or 0).preferred
    _emit(result.to_json() + "\n", args.out)
    print(result.summary(), file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_pulse_scan(args) -> int:
    if not (0 < args.theta <= 2 * np.pi):
        raise ConfigError(f"theta={args.theta} outside (0, 2*pi]")
    if args.spacing == "log":
        if args.eps_min <= 0:
            raise ConfigError("log spacing needs eps_min > 0")
        eps = np.logspace(np.log10(args.eps_min), np.log10(args.eps_max), args.points)
    else:
        eps = np.linspace(args.eps_min, args.eps_max, args.points)
    rows = pulses.scan(args.theta, eps, placement=args.placement)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["epsilon", "plain_infidelity", "bb1_infidelity"])
    for e, a, b in rows:
        wr.writerow([repr(float(e)), repr(float(a)), repr(float(b))])
    _emit(buf.getvalue(), args.out)
    pos = (rows[:, 0] > 0) & (rows[:, 1] > 0) & (rows[:, 2] > 0)
    if pos.sum() >= 2:
        print(f"slope plain={pulses.loglog_slope(rows[pos, 0], rows[pos, 1]):.3f} "
              f"bb1={pulses.loglog_slope(rows[pos, 0], rows[pos, 2]):.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_sequences(args) -> int:
    # the config's output key names the decay CSV, so only --out applies here
    _, cfg, _, _ = _load(args, lambda n: n >= 1)
    gates = computational_sequence(cfg, args.index)
    header = (f"# sequence {args.index} of {cfg.n_sequences}, n_qubits={cfg.n_qubits}, "
              f"seed={cfg.seed}\n")
    _emit(header + cl.format_sequence(gates), args.out)
    return EXIT_OK


def cmd_recover(args) -> int:
    try:
        text = Path(args.sequence).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.sequence}: {exc}") from exc
    try:
        gates = cl.parse_sequence(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n = args.n_qubits
    start = cl.SignedPauli(1, "Z" + "I" * (n - 1))
    try:
        for g in gates:
            if isinstance(g, cl.MultiGateLabel):
                g.validate(n)
            elif n != 1:
                raise ValueError(f"pulse label {g} needs n_qubits = 1")
        tracked = cl.propagate_sequence(gates, start)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if n == 1:
        gate, sign = cl.recovery_single(tracked, np.random.default_rng(args.seed or 0))
        rec = [gate]
    else:
        rec = cl.recovery_multi(tracked)
        sign = cl.propagate_sequence(rec, tracked).sign
    text = (f"# tracked {tracked}; recovery target {'+' if sign > 0 else '-'}{start.ops}\n"
            + cl.format_sequence(rec))
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randbench",
                                 description="Randomized benchmarking simulation and analysis.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; results do not depend on this")
        p.add_argument("--out", default=None, help="output CSV (default: config output or stdout)")
        p.add_argument("--manifest", default=None, help="manifest JSON path")

    p = sub.add_parser("single", help="single-qubit benchmarking run")
    common(p)
    p.set_defaults(func=cmd_single)
    p = sub.add_parser("multi", help="multi-qubit benchmarking run")
    common(p)
    p.set_defaults(func=cmd_multi)
    p = sub.add_parser("rf-compare", help="Monte Carlo vs analytic r.f. decay")
    common(p)
    p.add_argument("distribution", help="file of 'eps weight' lines")
    p.set_defaults(func=cmd_rf_compare)

    p = sub.add_parser("sequences", help="export one computational sequence as text")
    common(p)
    p.add_argument("--index", type=int, default=0, help="sequence index")
    p.set_defaults(func=cmd_sequences)

    p = sub.add_parser("recover", help="track +Z through a sequence file and print its recovery")
    p.add_argument("sequence", help="sequence text file, one gate label per line")
    p.add_argument("--n-qubits", type=int, default=1, help="register size")
    p.add_argument("--seed", type=int, default=None, help="seed for the single-qubit target sign")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("fit", help="fit a decay CSV")
    p.add_argument("csv", help="decay CSV (length, mean_fidelity, std_dev, n_runs)")
    p.add_argument("--dim", type=int, required=True, help="Hilbert-space dimension D")
    p.add_argument("--fixed-offset", default=None,
                   help="pin the offset B to a number or to '1/D' (default: free)")
    p.add_argument("--min-length", type=int, default=None, help="drop shorter lengths")
    p.add_argument("--n-bootstrap", type=int, default=500, help="bootstrap resamples")
    p.add_argument("--seed", type=int, default=None, help="bootstrap seed")
    p.add_argument("--out", default=None, help="FitResult JSON path (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("pulse-scan", help="plain vs BB1 infidelity against calibration error")
    p.add_argument("--theta", type=float, default=np.pi / 2, help="target flip angle (rad)")
    p.add_argument("--eps-min", type=float, default=1e-3)
    p.add_argument("--eps-max", type=float, default=1e-1)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--placement", choices=("before", "after", "symmetric"), default="before")
    p.add_argument("--seed", type=int, default=None, help="accepted for uniformity; unused")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_pulse_scan)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
