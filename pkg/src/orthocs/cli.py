"""Command-line entry point: ``orthocs <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import harness
from .harness import ExperimentRecord


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML/JSON experiment file")
    p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per row")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--field", choices=("complex", "real"), help="scalar field")
    p.add_argument("--workers", type=int, help="worker processes for Monte Carlo trials")
    g = p.add_argument_group("single-row ensemble (used without --config)")
    g.add_argument("--ensemble", choices=("A", "B", "C", "gaussian"), default="B")
    g.add_argument("--mu", type=float, nargs="+", default=[0.75])
    g.add_argument("--nu", type=float, nargs="+")
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--n", type=int, default=4096, help="base transform size N")
    g.add_argument("--transform", choices=("dft", "dct", "haar"))
    g.add_argument("--lam", type=float, nargs="+", default=[0.1])
    g.add_argument("--sigma0-sq", type=float)
    g.add_argument("--snr-db", type=float)
    g.add_argument("--rho-x", type=float, default=0.15)
    g.add_argument("--n-grid", type=int, nargs="+")
    g.add_argument("--id", default=None)


def _document(args: argparse.Namespace) -> dict[str, Any]:
    if args.config is not None:
        with open(args.config) as fh:
            return yaml.safe_load(fh) or {}
    row: dict[str, Any] = {"ensemble": args.ensemble, "base_n": args.n, "lambda": args.lam, "rho_x": args.rho_x}
    if args.ensemble in ("A", "gaussian"):
        row["alpha"] = args.alpha
    elif args.ensemble == "B":
        row["mu"] = args.mu[0]
        row["nu"] = args.nu[0] if args.nu else args.alpha * args.mu[0]
    else:
        row["mu"] = args.mu
        row["nu"] = args.nu if args.nu else [args.alpha * sum(args.mu)]
    if args.transform:
        row["transform"] = args.transform
    if args.snr_db is not None:
        row["snr_db"] = args.snr_db
    else:
        row["sigma0_sq"] = 1e-2 if args.sigma0_sq is None else args.sigma0_sq
    row["id"] = args.id or f"{args.ensemble}"
    doc: dict[str, Any] = {"rows": [row], "master_seed": 0, "trials": 100}
    if args.n_grid:
        doc["n_grid"] = args.n_grid
    return doc


def _configs(args: argparse.Namespace) -> list[harness.ExperimentConfig]:
    overrides = {
        "master_seed": args.seed,
        "trials": args.trials,
        "workers": args.workers,
        "output_path": str(args.out) if args.out else None,
        "output_format": args.format,
        "field": args.field,
    }
    return harness.configs_from_dict(_document(args), overrides)


def _emit(records: Sequence[ExperimentRecord], configs: Sequence[harness.ExperimentConfig], out=None) -> None:
    out = sys.stdout if out is None else out
    cfg = configs[0]
    if cfg.output_path is not None:
        harness.write_records(records, cfg.output_path, cfg.output_format)
        return
    if cfg.output_format == "json":
        buf = io.StringIO()
        json.dump([harness._record_json(r, timing=False) for r in records], buf, indent=2, sort_keys=True)
        out.write(buf.getvalue() + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(harness.CSV_COLUMNS)
    for r in records:
        w.writerow([harness._fmt(v) for v in (r.ensemble_id, r.mu, r.nu, r.lam, r.sigma0_sq, r.rho_x,
                                              r.theory_db, r.empirical_db, r.stderr_db, r.trials, r.n)])


def cmd_predict(args) -> int:
    configs = _configs(args)
    records = harness.run_table(configs, simulate=False)
    _emit(records, configs)
    return 0 if all(r.theory_db is not None for r in records) else 1


def cmd_simulate(args) -> int:
    configs = _configs(args)
    _emit(harness.run_table(configs, theory=False), configs)
    return 0


def cmd_table(args) -> int:
    configs = _configs(args)
    _emit(harness.run_table(configs), configs)
    return 0


def cmd_sweep(args) -> int:
    configs = _configs(args)
    records, summaries = harness.sweep_lambda(configs, simulate=args.simulate)
    _emit(records, configs)
    for s in summaries:
        print(f"# {s.ensemble_id}: min {s.source} MSE {s.best_db:.4f} dB at lambda={s.best_lam:g}", file=sys.stderr)
    return 0


def cmd_extrapolate(args) -> int:
    configs = _configs(args)
    results = [harness.extrapolate_n(cfg, scale_trials=not args.fixed_trials) for cfg in configs]
    payload = []
    for res in results:
        d = asdict(res)
        d.pop("records")
        payload.append(d)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    cfg = configs[0]
    if cfg.output_path is not None:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_spectrum(args) -> int:
    configs = _configs(args)
    out = []
    for cfg in configs:
        prefix = None
        if cfg.output_path is not None:
            prefix = Path(cfg.output_path)
            if len(configs) > 1:
                prefix = prefix.with_name(f"{prefix.name}.{cfg.ensemble_id}")
        metrics = harness.spectrum_report(cfg.ensemble, cfg.master_seed, prefix)
        out.append({"ensemble_id": cfg.ensemble_id, **metrics})
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthocs", description="LASSO MSE theory and simulation for structurally orthogonal matrices")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("predict", cmd_predict, "replica prediction only"),
        ("simulate", cmd_simulate, "Monte Carlo only"),
        ("table", cmd_table, "theory and Monte Carlo per row"),
        ("sweep", cmd_sweep, "lambda sweep with argmin report"),
        ("extrapolate", cmd_extrapolate, "finite-N quadratic extrapolation"),
        ("spectrum", cmd_spectrum, "empirical vs analytic eigenvalue law"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.set_defaults(func=fn)
        if name == "sweep":
            p.add_argument("--simulate", action="store_true", help="also run Monte Carlo at every lambda")
        if name == "extrapolate":
            p.add_argument("--fixed-trials", action="store_true", help="same trial count at every N")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
