"""Experiment orchestration: theory vs Monte Carlo tables, sweeps, extrapolation.

Configuration files are YAML (JSON is accepted too, being a YAML subset)::

    master_seed: 1
    trials: 2000
    workers: 1
    defaults:            # any row key may appear here
      base_n: 4096
      lambda: 0.1
      sigma0_sq: 0.01    # or snr_db: 20
      rho_x: 0.15
      field: complex
      transform: dft
    rows:
      - {id: B-0.75, ensemble: B, mu: 0.75, nu: 0.375}
      - {id: C-4, ensemble: C, mu: [1, 1, 1], nu: [1, 1]}
    n_grid: [256, 512, 1024]   # extrapolation only
    lasso: {rel_tol: 1.0e-8, max_iters: 20000}
    output: {path: out.csv, format: csv}

``ensemble`` is one of ``A`` (needs ``alpha``), ``B`` (``mu``, ``nu``,
optional ``gain``), ``C`` (lists ``mu``, ``nu``, optional ``mask`` or
``gains``) or ``gaussian`` (``alpha``).  ``lambda`` may be a list for sweeps.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from . import lasso, replica, spectrum
from .model import Field, SignalPrior, generate_instance, trial_rng
from .operators import BaseTransform, EnsembleSpec, Kind, build_operator

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "ensemble_id", "mu", "nu", "lambda", "sigma0_sq", "rho_x",
    "theory_db", "empirical_db", "stderr_db", "trials", "n",
)
_DB_PER_NEPER = 10.0 / math.log(10.0)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One parameter row: an ensemble, a prior, noise level and one or more ``lam`` values."""

    ensemble_id: str
    ensemble: EnsembleSpec
    prior: SignalPrior
    sigma0_sq: float
    lam: tuple[float, ...]
    trials: int = 1
    master_seed: int = 0
    stream: int = 0
    n_grid: tuple[int, ...] | None = None
    output_path: Path | None = None
    output_format: str = "csv"
    workers: int = 1
    rel_tol: float = 1e-8
    max_iters: int = 20_000

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        object.__setattr__(self, "lam", lam)
        if not lam:
            raise ValueError("lambda grid must be nonempty")
        if any(not v > 0 for v in lam):
            raise ValueError("lambda values must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.sigma0_sq < 0:
            raise ValueError("sigma0_sq must be nonnegative")
        if self.output_format not in ("csv", "json"):
            raise ValueError("output_format must be 'csv' or 'json'")
        if self.prior.field is not self.ensemble.field:
            raise ValueError("prior and ensemble fields differ")
        if self.n_grid is not None:
            object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))


def _ensemble_from_row(row: dict[str, Any]) -> EnsembleSpec:
    kind = str(row.get("ensemble", "B")).lower()
    n = int(row.get("base_n", 4096))
    fld = Field(row.get("field", "complex"))
    default_transform = "dft" if fld is Field.COMPLEX else "dct"
    kw = {"field": fld, "base_transform": BaseTransform(row.get("transform", default_transform))}
    if kind == "a":
        return EnsembleSpec.type_a(n, float(row["alpha"]), gain=float(row.get("gain", 1.0)), **kw)
    if kind == "b":
        gain = row.get("gain")
        return EnsembleSpec.type_b(n, float(row["mu"]), float(row["nu"]), gain=None if gain is None else float(gain), **kw)
    if kind == "c":
        mu, nu = list(np.atleast_1d(row["mu"])), list(np.atleast_1d(row["nu"]))
        if "gains" in row:
            return EnsembleSpec(n, tuple(nu), tuple(mu), row["gains"], **kw)
        return EnsembleSpec.type_c(n, mu, nu, mask=row.get("mask"), **kw)
    if kind == "gaussian":
        alpha = float(row["alpha"])
        return EnsembleSpec(n, (alpha,), (1.0,), ((1.0,),), field=kw["field"], kind=Kind.GAUSSIAN_IID)
    raise ValueError(f"unknown ensemble type {row.get('ensemble')!r}")


def _sigma0_sq(row: dict[str, Any]) -> float:
    if "snr_db" in row:
        return 10.0 ** (-float(row["snr_db"]) / 10.0)
    return float(row.get("sigma0_sq", 1e-2))


def configs_from_dict(data: dict[str, Any], overrides: dict[str, Any] | None = None) -> list[ExperimentConfig]:
    """Expand a parsed config document into one :class:`ExperimentConfig` per row.

    ``overrides`` (from the command line) take precedence: keys ``master_seed``,
    ``trials``, ``output_path``, ``output_format``, ``workers`` and any row key
    such as ``field``.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    top = {**data, **{k: overrides[k] for k in ("master_seed", "trials", "workers") if k in overrides}}
    out_cfg = dict(data.get("output") or {})
    out_path = overrides.get("output_path", out_cfg.get("path"))
    out_fmt = overrides.get("output_format", out_cfg.get("format", "csv"))
    lasso_cfg = dict(data.get("lasso") or {})
    defaults = dict(data.get("defaults") or {})
    row_overrides = {k: v for k, v in overrides.items() if k not in ("master_seed", "trials", "workers", "output_path", "output_format")}
    rows = data.get("rows") or [{}]
    configs = []
    for i, raw in enumerate(rows):
        row = {**defaults, **raw, **row_overrides}
        if row_overrides.get("field") == "real" and row.get("transform", "dft") == "dft":
            row["transform"] = "dct"
        ens = _ensemble_from_row(row)
        configs.append(
            ExperimentConfig(
                ensemble_id=str(row.get("id", f"row{i}")),
                ensemble=ens,
                prior=SignalPrior(float(row.get("rho_x", 0.15)), ens.field),
                sigma0_sq=_sigma0_sq(row),
                lam=tuple(np.atleast_1d(row.get("lambda", 0.1))),
                trials=int(top.get("trials", 1)),
                master_seed=int(top.get("master_seed", 0)),
                stream=i,
                n_grid=tuple(data["n_grid"]) if data.get("n_grid") else None,
                output_path=Path(out_path) if out_path else None,
                output_format=str(out_fmt),
                workers=int(top.get("workers", 1)),
                rel_tol=float(lasso_cfg.get("rel_tol", 1e-8)),
                max_iters=int(lasso_cfg.get("max_iters", 20_000)),
            )
        )
    return configs


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> list[ExperimentConfig]:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return configs_from_dict(data, overrides)


# ---------------------------------------------------------------------------
# records and persistence


@dataclass
class ExperimentRecord:
    ensemble_id: str
    mu: tuple[float, ...]
    nu: tuple[float, ...]
    lam: float
    sigma0_sq: float
    rho_x: float
    theory_db: float | None
    empirical_db: float | None
    stderr_db: float | None
    trials: int
    n: int
    wall_time: float = field(default=0.0, compare=False)
    per_trial_mse: list[float] | None = field(default=None, compare=False, repr=False)
    note: str = field(default="", compare=False)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return ";".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_opt(s: str) -> float | None:
    return None if s == "" else float(s)


def write_csv(records: Sequence[ExperimentRecord], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in (r.ensemble_id, r.mu, r.nu, r.lam, r.sigma0_sq, r.rho_x,
                                          r.theory_db, r.empirical_db, r.stderr_db, r.trials, r.n)])
    return path


def read_csv(path: str | Path) -> list[ExperimentRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ExperimentRecord(
                ensemble_id=row["ensemble_id"],
                mu=tuple(float(x) for x in row["mu"].split(";")),
                nu=tuple(float(x) for x in row["nu"].split(";")),
                lam=float(row["lambda"]),
                sigma0_sq=float(row["sigma0_sq"]),
                rho_x=float(row["rho_x"]),
                theory_db=_parse_opt(row["theory_db"]),
                empirical_db=_parse_opt(row["empirical_db"]),
                stderr_db=_parse_opt(row["stderr_db"]),
                trials=int(row["trials"]),
                n=int(row["n"]),
            ))
    return out


def _record_json(r: ExperimentRecord, timing: bool) -> dict[str, Any]:
    d = asdict(r)
    d["mu"], d["nu"] = list(r.mu), list(r.nu)
    d["lambda"] = d.pop("lam")
    if not timing:
        d.pop("wall_time")
    return d


def write_json(records: Sequence[ExperimentRecord], path: str | Path, *, timing: bool = False) -> Path:
    """JSON dump including per-trial values; wall times only with ``timing`` so files stay reproducible."""
    path = Path(path)
    path.write_text(json.dumps([_record_json(r, timing) for r in records], indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: str | Path) -> list[ExperimentRecord]:
    out = []
    for d in json.loads(Path(path).read_text()):
        d = dict(d)
        d["lam"] = d.pop("lambda")
        d["mu"], d["nu"] = tuple(d["mu"]), tuple(d["nu"])
        out.append(ExperimentRecord(**{f.name: d[f.name] for f in fields(ExperimentRecord) if f.name in d}))
    return out


def write_records(records: Sequence[ExperimentRecord], path: str | Path, fmt: str = "csv") -> Path:
    return write_csv(records, path) if fmt == "csv" else write_json(records, path)


# ---------------------------------------------------------------------------
# theory and Monte Carlo


def predict(ensemble: EnsembleSpec, lam: float, sigma0_sq: float, rho_x: float) -> tuple[replica.ReplicaSolution | None, str]:
    """Replica prediction, or ``(None, reason)`` when none is available."""
    if ensemble.kind is Kind.GAUSSIAN_IID:
        return None, "no replica prediction for the i.i.d. Gaussian ensemble"
    try:
        spec = replica.ReplicaSpec.from_ensemble(ensemble, lam, sigma0_sq, rho_x)
        if spec.l_r == 1 and spec.l_c == 1:
            sol = replica.solve_type_b(
                spec.nu[0] / spec.mu[0], spec.mu[0], spec.nu[0], spec.gains[0][0],
                lam=lam, sigma0_sq=sigma0_sq, rho_x=rho_x, field=spec.field,
            )
        else:
            sol = replica.solve_general(spec)
    except (replica.ReplicaError, ValueError) as exc:
        return None, f"replica solver failed: {exc}"
    if not sol.converged:
        return None, f"replica solver did not converge (residual {sol.residual:.3g})"
    return sol, ""


def _one_trial(args) -> np.ndarray:
    ensemble, prior, sigma0_sq, lams, seed, stream, trial, rel_tol, max_iters = args
    rng = trial_rng(seed, trial, *stream)
    op = build_operator(ensemble, rng)
    inst = generate_instance(op, prior, sigma0_sq, rng)
    out = np.empty(len(lams))
    x = None
    # lam values share the instance; warm starts only change the iteration count
    for k, lam in enumerate(lams):
        cfg = lasso.LassoConfig(lam, max_iters=max_iters, rel_tol=rel_tol, field=ensemble.field)
        res = lasso.solve(inst.y, op, cfg, x_init=x)
        if not res.converged:
            logger.warning("LASSO hit max_iters=%d (trial %d, lam %g)", max_iters, trial, lam)
        x = res.x_hat
        out[k] = lasso.empirical_mse(inst.x0, x)
    return out


def run_trials(
    ensemble: EnsembleSpec,
    prior: SignalPrior,
    sigma0_sq: float,
    lams: Sequence[float],
    trials: int,
    master_seed: int,
    *,
    stream: Sequence[int] = (),
    workers: int = 1,
    rel_tol: float = 1e-8,
    max_iters: int = 20_000,
) -> np.ndarray:
    """Per-trial MSE, shape ``(trials, len(lams))``, ordered by trial index.

    Trial ``k`` draws its operator, signal and noise from its own stream, so
    results do not depend on ``workers``.
    """
    jobs = [(ensemble, prior, sigma0_sq, tuple(lams), master_seed, tuple(stream), k, rel_tol, max_iters)
            for k in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_trial, jobs, chunksize=max(1, trials // (8 * workers))))
    else:
        rows = [_one_trial(j) for j in jobs]
    return np.vstack(rows) if rows else np.empty((0, len(lams)))


def summarize(mse: np.ndarray) -> tuple[float | None, float | None]:
    """``(mean in dB, standard error in dB)``; the error uses the delta method on the mean."""
    mse = np.asarray(mse, float)
    if mse.size == 0:
        return None, None
    mean = float(np.mean(mse))
    if mean == 0.0:
        return -math.inf, None
    stderr = None
    if mse.size > 1:
        stderr = _DB_PER_NEPER * float(np.std(mse, ddof=1)) / math.sqrt(mse.size) / mean
    return replica.to_db(mean), stderr


def run_table(configs: Iterable[ExperimentConfig], *, theory: bool = True, simulate: bool = True) -> list[ExperimentRecord]:
    """One record per (row, lam).  Solver failures are noted on the row and the run continues."""
    records = []
    for cfg in configs:
        t0 = time.perf_counter()
        per = None
        if simulate:
            per = run_trials(cfg.ensemble, cfg.prior, cfg.sigma0_sq, cfg.lam, cfg.trials, cfg.master_seed,
                             stream=(cfg.stream,), workers=cfg.workers, rel_tol=cfg.rel_tol, max_iters=cfg.max_iters)
        for k, lam in enumerate(cfg.lam):
            th_db, note = None, ""
            if theory:
                sol, note = predict(cfg.ensemble, lam, cfg.sigma0_sq, cfg.prior.rho_x)
                th_db = sol.total_mse_db if sol is not None else None
                if note:
                    logger.warning("%s (lam=%g): %s", cfg.ensemble_id, lam, note)
            emp_db = se_db = None
            if per is not None:
                emp_db, se_db = summarize(per[:, k])
            records.append(ExperimentRecord(
                ensemble_id=cfg.ensemble_id,
                mu=cfg.ensemble.mu,
                nu=cfg.ensemble.nu,
                lam=lam,
                sigma0_sq=cfg.sigma0_sq,
                rho_x=cfg.prior.rho_x,
                theory_db=th_db,
                empirical_db=emp_db,
                stderr_db=se_db,
                trials=cfg.trials if per is not None else 0,
                n=cfg.ensemble.base_n,
                wall_time=time.perf_counter() - t0,
                per_trial_mse=[float(v) for v in per[:, k]] if per is not None else None,
                note=note,
            ))
    return records


@dataclass
class SweepSummary:
    ensemble_id: str
    best_lam: float
    best_db: float
    source: str


def sweep_lambda(configs: Iterable[ExperimentConfig], *, simulate: bool = False) -> tuple[list[ExperimentRecord], list[SweepSummary]]:
    """Evaluate every ``lam`` of each row and report the minimizing one.

    The minimum is taken over the theory curve, or over the empirical curve
    for rows without a prediction.
    """
    configs = list(configs)
    for cfg in configs:
        if list(cfg.lam) != sorted(cfg.lam):
            raise ValueError(f"lambda grid of {cfg.ensemble_id} must be sorted ascending")
    records = run_table(configs, simulate=simulate)
    summaries = []
    for cfg in configs:
        rows = [r for r in records if r.ensemble_id == cfg.ensemble_id]
        use_theory = all(r.theory_db is not None for r in rows)
        vals = [r.theory_db if use_theory else r.empirical_db for r in rows]
        if any(v is None for v in vals):
            logger.warning("%s: no complete curve to minimize", cfg.ensemble_id)
            continue
        k = int(np.argmin(vals))
        summaries.append(SweepSummary(cfg.ensemble_id, rows[k].lam, float(vals[k]), "theory" if use_theory else "empirical"))
    return records, summaries


# ---------------------------------------------------------------------------
# finite-size extrapolation


def fit_quadratic(inv_n: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Least-squares ``c0 + c1 t + c2 t^2`` through ``(t, value)``; returns ``[c0, c1, c2]``."""
    t = np.asarray(inv_n, float)
    v = np.asarray(values, float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("inv_n and values must be 1-D of equal length")
    design = np.vander(t, 3, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(design, v, rcond=None)
    if rank < 3:
        raise ValueError("quadratic fit needs at least three distinct sizes")
    return coef


@dataclass
class ExtrapolationResult:
    ensemble_id: str
    n_values: list[int]
    mse: list[float]
    stderr_db: list[float | None]
    trials: list[int]
    coefficients: list[float]
    intercept_db: float
    theory_db: float | None
    gap_db: float | None
    records: list[ExperimentRecord] = field(default_factory=list, repr=False)


def extrapolate_n(cfg: ExperimentConfig, *, scale_trials: bool = True) -> ExtrapolationResult:
    """Run Monte Carlo at each size in ``cfg.n_grid`` and extrapolate the MSE to ``N -> inf``.

    The fit is on the linear MSE as a quadratic in ``1/N``.  With
    ``scale_trials`` a size ``N`` gets ``trials * max(n_grid) / N`` trials so
    every size has a similar standard error.
    """
    if not cfg.n_grid or len(set(cfg.n_grid)) < 3:
        raise ValueError("extrapolation needs at least three distinct base sizes")
    if len(cfg.lam) != 1:
        raise ValueError("extrapolation uses a single lambda")
    n_max = max(cfg.n_grid)
    means, ses, counts, records = [], [], [], []
    for n in cfg.n_grid:
        k = cfg.trials * (n_max // n) if scale_trials else cfg.trials
        sub = replace(cfg, ensemble=cfg.ensemble.with_base_n(n), trials=k, ensemble_id=f"{cfg.ensemble_id}@{n}")
        rec = run_table([sub], theory=False)[0]
        records.append(rec)
        means.append(float(np.mean(rec.per_trial_mse)))
        ses.append(rec.stderr_db)
        counts.append(k)
    coef = fit_quadratic([1.0 / n for n in cfg.n_grid], means)
    intercept_db = replica.to_db(coef[0]) if coef[0] > 0 else -math.inf
    sol, _ = predict(cfg.ensemble, cfg.lam[0], cfg.sigma0_sq, cfg.prior.rho_x)
    th = sol.total_mse_db if sol is not None else None
    return ExtrapolationResult(
        ensemble_id=cfg.ensemble_id,
        n_values=list(cfg.n_grid),
        mse=means,
        stderr_db=ses,
        trials=counts,
        coefficients=[float(c) for c in coef],
        intercept_db=intercept_db,
        theory_db=th,
        gap_db=None if th is None else intercept_db - th,
        records=records,
    )


# ---------------------------------------------------------------------------
# spectra


def law_for(ensemble: EnsembleSpec) -> spectrum.SpectralDensity:
    """Closed-form eigenvalue law matching a single-block or Gaussian ensemble."""
    if ensemble.kind is Kind.GAUSSIAN_IID:
        return spectrum.mp_density(ensemble.alpha)
    if ensemble.l_r != 1 or ensemble.l_c != 1:
        raise ValueError("closed-form eigenvalue laws exist only for single-block ensembles")
    return spectrum.haar_density(ensemble.mu[0], ensemble.nu[0], ensemble.gains[0][0])


def spectrum_report(ensemble: EnsembleSpec, seed: int, out_prefix: str | Path | None = None) -> dict[str, Any]:
    """Compare one realization's eigenvalues with the matching law.

    Writes ``<prefix>.density.csv`` (+ ``.density.atoms.csv``),
    ``<prefix>.hist.csv`` and ``<prefix>.metrics.json`` when a prefix is given.
    """
    law = law_for(ensemble)
    op = build_operator(ensemble, seed)
    eig = spectrum.empirical_spectrum(op)
    metrics = {
        "law": law.name,
        "eigenvalues": int(eig.size),
        "ks": spectrum.density_distance(eig, law, spectrum.Metric.KS),
        "l1hist": spectrum.density_distance(eig, law, spectrum.Metric.L1_HIST),
        "support": list(law.support),
        "atoms": [list(a) for a in law.atoms],
    }
    if out_prefix is not None:
        prefix = Path(out_prefix)
        spectrum.write_density_csv(law, prefix.with_name(prefix.name + ".density.csv"))
        edges, dens = spectrum.histogram(eig, law.upper)
        with prefix.with_name(prefix.name + ".hist.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "density"])
            w.writerows((repr(float(a)), repr(float(b)), repr(float(d))) for a, b, d in zip(edges[:-1], edges[1:], dens))
        prefix.with_name(prefix.name + ".metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return metrics
