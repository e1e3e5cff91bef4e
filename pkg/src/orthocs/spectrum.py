"""Eigenvalue laws of ``A A^H`` and empirical comparison tools.

Two closed-form laws are provided: the limit for doubly selected Haar
(or scrambled orthonormal) matrices and the Marchenko-Pastur law of an
i.i.d. Gaussian matrix.  A law is a continuous density on ``[a_lo, a_hi]``
plus point atoms.

Both continuous parts carry a ``sqrt((x - a_lo)(a_hi - x))`` factor, so
integrals use ``x = a_lo + (a_hi - a_lo)(1 - cos t)/2``, which turns the
square-root endpoints (and the ``1/x`` or ``1/(R - x)`` poles that can sit
on them) into a smooth integrand in ``t``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, stats

from .model import SeedLike, make_rng
from .operators import MeasurementOperator, SizeCapError

DEFAULT_EIG_CAP = 4096
_QUAD_TOL = 1e-12


class Metric(str, enum.Enum):
    KS = "ks"
    L1_HIST = "l1hist"


@dataclass(frozen=True)
class SpectralDensity:
    """Continuous density on ``support`` plus ``atoms`` as ``(location, weight)`` pairs."""

    continuous_part: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    support: tuple[float, float]
    atoms: tuple[tuple[float, float], ...] = ()
    name: str = ""

    def __post_init__(self):
        lo, hi = self.support
        if not lo <= hi:
            raise ValueError("support must satisfy a_lo <= a_hi")
        if any(w < 0 for _, w in self.atoms):
            raise ValueError("atom weights must be nonnegative")
        object.__setattr__(self, "atoms", tuple((float(x), float(w)) for x, w in self.atoms if w > 0))

    @property
    def degenerate(self) -> bool:
        lo, hi = self.support
        return hi - lo <= 1e-14 * max(1.0, abs(hi))

    @property
    def upper(self) -> float:
        """Largest point carrying mass."""
        return max([self.support[1]] + [x for x, _ in self.atoms])

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        lo, hi = self.support
        out = np.zeros_like(x)
        if self.degenerate:
            return out
        inside = (x > lo) & (x < hi)
        out[inside] = self.continuous_part(x[inside])
        return out

    def _theta(self, x) -> np.ndarray:
        lo, hi = self.support
        u = np.clip((np.asarray(x, float) - lo) / (hi - lo), 0.0, 1.0)
        return np.arccos(1.0 - 2.0 * u)

    def _integrand(self, t):
        lo, hi = self.support
        x = lo + (hi - lo) * (1.0 - math.cos(t)) / 2.0
        dx = (hi - lo) * math.sin(t) / 2.0
        if dx == 0.0:
            return 0.0
        return float(self.continuous_part(np.array([x]))[0]) * dx

    def _continuous_cdf(self, x) -> np.ndarray:
        """``int_{a_lo}^{x} f`` evaluated by summing quadrature over consecutive sorted points."""
        x = np.atleast_1d(np.asarray(x, float))
        if self.degenerate:
            return np.zeros_like(x)
        order = np.argsort(x, kind="stable")
        thetas = self._theta(x[order])
        acc, prev = 0.0, 0.0
        out = np.empty_like(thetas)
        for i, t in enumerate(thetas):
            if t > prev:
                acc += integrate.quad(self._integrand, prev, t, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[0]
                prev = t
            out[i] = acc
        res = np.empty_like(out)
        res[order] = out
        return res

    def cdf(self, x, *, left: bool = False) -> np.ndarray:
        """``P(X <= x)``, or ``P(X < x)`` with ``left=True`` (atoms excluded at ``x``)."""
        x = np.asarray(x, float)
        out = self._continuous_cdf(x).reshape(x.shape)
        for loc, w in self.atoms:
            out = out + w * ((x > loc) if left else (x >= loc))
        return out

    def continuous_mass(self) -> float:
        if self.degenerate:
            return 0.0
        return integrate.quad(self._integrand, 0.0, math.pi, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[0]

    def mass(self) -> float:
        return self.continuous_mass() + sum(w for _, w in self.atoms)

    def sample(self, n: int, seed: SeedLike = None, grid: int = 4097) -> np.ndarray:
        """Draw ``n`` values by inverse-CDF sampling.

        The CDF is tabulated on a uniform grid in the angle variable (where it
        is smooth) and inverted by interpolation; atoms are picked with their
        weights.
        """
        rng = make_rng(seed)
        u = rng.random(n)
        c_mass = self.continuous_mass()
        total = c_mass + sum(w for _, w in self.atoms)
        out = np.empty(n)
        edge = c_mass / total
        cont = u < edge
        if np.any(cont):
            thetas = np.linspace(0.0, math.pi, grid)
            lo, hi = self.support
            table = self._continuous_cdf(lo + (hi - lo) * (1.0 - np.cos(thetas)) / 2.0) / c_mass
            t = np.interp(u[cont] / edge, table, thetas)
            out[cont] = lo + (hi - lo) * (1.0 - np.cos(t)) / 2.0
        if np.any(~cont):
            locs = np.array([x for x, _ in self.atoms])
            cum = np.cumsum([w for _, w in self.atoms]) / (total - c_mass)
            v = (u[~cont] - edge) / (1.0 - edge)
            out[~cont] = locs[np.minimum(np.searchsorted(cum, v, side="right"), len(locs) - 1)]
        return out


def haar_density(mu: float, nu: float, R: float) -> SpectralDensity:
    """Limit law of the ``min(M, N)`` largest eigenvalues of ``A A^H``.

    ``A`` keeps a fraction ``mu`` of the columns and ``nu`` of the rows of a
    Haar (or scrambled orthonormal) matrix, scaled by ``sqrt(R)``.  The mass
    ``(mu + nu - 1)_+ / min(mu, nu)`` sits at ``R``, where the selected rows
    and columns overlap in a fully orthonormal subspace.
    """
    if not (0 < mu <= 1 and 0 < nu <= 1 and R > 0):
        raise ValueError(f"need 0 < mu <= 1, 0 < nu <= 1 and R > 0 (got {mu}, {nu}, {R})")
    a = math.sqrt((1 - mu) * nu)
    b = math.sqrt((1 - nu) * mu)
    lo, hi = R * (a - b) ** 2, R * (a + b) ** 2
    mn = min(mu, nu)

    def f(x):
        x = np.asarray(x, float)
        return np.sqrt(np.maximum((x - lo) * (hi - x), 0.0)) / (2 * np.pi * x * (R - x) * mn)

    atom = max(nu + mu - 1.0, 0.0) / mn
    return SpectralDensity(f, (lo, hi), ((R, atom),) if atom > 0 else (), name=f"haar(mu={mu},nu={nu},R={R})")


def mp_density(alpha: float) -> SpectralDensity:
    """Marchenko-Pastur law of ``A A^H`` for ``A`` with i.i.d. entries of variance ``1/N``, ``M = alpha N``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lo, hi = (1 - math.sqrt(alpha)) ** 2, (1 + math.sqrt(alpha)) ** 2

    def f(x):
        x = np.asarray(x, float)
        return np.sqrt(np.maximum((x - lo) * (hi - x), 0.0)) / (2 * np.pi * x * alpha)

    atom = max(1.0 - 1.0 / alpha, 0.0)
    return SpectralDensity(f, (lo, hi), ((0.0, atom),) if atom > 0 else (), name=f"mp(alpha={alpha})")


def empirical_spectrum(op: MeasurementOperator, *, truncate: bool = True, cap: int = DEFAULT_EIG_CAP) -> np.ndarray:
    """Eigenvalues of ``A A^H`` in descending order.

    With ``truncate`` only the ``min(M, N)`` largest are kept; when ``M > N``
    the rest are structurally zero and are not part of the limiting laws.
    """
    if op.m_bar > cap:
        raise SizeCapError(f"M={op.m_bar} exceeds the eigensolver cap of {cap}")
    a = op.materialize(cap=max(op.m_bar * op.n_bar, 1))
    gram = a @ a.conj().T
    ev = linalg.eigvalsh(gram)[::-1]
    if truncate:
        ev = ev[: min(op.m_bar, op.n_bar)]
    return np.ascontiguousarray(ev)


def _snap(samples: np.ndarray, law: SpectralDensity, tol: float) -> np.ndarray:
    """Move samples within ``tol`` (relative) of an atom onto it, so round-off does not count as mismatch."""
    out = samples.copy()
    for loc, _ in law.atoms:
        out[np.abs(out - loc) <= tol * max(1.0, abs(loc))] = loc
    return out


def _ks_law(samples: np.ndarray, law: SpectralDensity, snap_tol: float) -> float:
    x = np.sort(_snap(samples, law, snap_tol))
    n = x.size
    pts = np.unique(np.concatenate([x, [loc for loc, _ in law.atoms]]))
    below = np.searchsorted(x, pts, side="left") / n
    upto = np.searchsorted(x, pts, side="right") / n
    cont = law._continuous_cdf(pts)
    f_left = cont + sum(w * (pts > loc) for loc, w in law.atoms)
    f_right = cont + sum(w * (pts >= loc) for loc, w in law.atoms)
    return float(max(np.max(np.abs(f_left - below)), np.max(np.abs(f_right - upto))))


def _bin_edges(upper: float) -> np.ndarray:
    return np.linspace(0.0, upper * 1.05, 101)


def density_distance(samples, law, metric: Metric | str = Metric.KS, *, snap_tol: float = 1e-9) -> float:
    """Distance between an eigenvalue sample and a law (or a second sample).

    ``KS`` is the sup distance between CDFs, atoms included; against a sample
    it is the two-sample statistic.  ``L1_HIST`` sums absolute differences of
    bin probabilities over 100 uniform bins on ``[0, 1.05 * max(upper, max
    sample)]``.
    """
    x = np.asarray(samples, float).ravel()
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    metric = Metric(metric)
    if isinstance(law, SpectralDensity):
        if metric is Metric.KS:
            return _ks_law(x, law, snap_tol)
        x = _snap(x, law, snap_tol)
        edges = _bin_edges(max(law.upper, float(x.max())))
        emp = np.histogram(x, edges)[0] / x.size
        # right-closed bins so an atom sits in the same bin as samples snapped onto it
        cdf = law.cdf(edges)
        cdf[0] = law.cdf(np.array([0.0]), left=True)[0]
        ref = np.diff(cdf)
        # numpy's last bin is closed; the law's mass at exactly the top edge is zero either way
        return float(np.sum(np.abs(emp - ref)))
    y = np.asarray(law, float).ravel()
    if y.size == 0:
        raise ValueError("comparison sample must be nonempty")
    if metric is Metric.KS:
        return float(stats.ks_2samp(x, y).statistic)
    edges = _bin_edges(max(float(x.max()), float(y.max())))
    return float(np.sum(np.abs(np.histogram(x, edges)[0] / x.size - np.histogram(y, edges)[0] / y.size)))


def law_distance(a: SpectralDensity, b: SpectralDensity, metric: Metric | str = Metric.KS, points: int = 1000) -> float:
    """Distance between two laws on a uniform grid of ``points`` over their joint range.

    ``KS`` is the largest CDF gap on the grid; ``L1_HIST`` integrates
    ``|f_a - f_b|`` by the trapezoid rule and adds the unmatched atom mass.
    """
    metric = Metric(metric)
    lo = min(a.support[0], b.support[0], *(x for x, _ in a.atoms + b.atoms))
    hi = max(a.upper, b.upper)
    grid = np.linspace(lo, hi, points)
    if metric is Metric.KS:
        return float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))
    cont = integrate.trapezoid(np.abs(a.pdf(grid) - b.pdf(grid)), grid)
    locs = sorted({x for x, _ in a.atoms + b.atoms})
    atom_gap = sum(abs(dict(a.atoms).get(x, 0.0) - dict(b.atoms).get(x, 0.0)) for x in locs)
    return float(cont + atom_gap)


def density_curve(law: SpectralDensity, points: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = law.support
    if law.degenerate:
        x = np.array([lo])
    else:
        t = np.linspace(0.0, math.pi, points)
        x = lo + (hi - lo) * (1.0 - np.cos(t)) / 2.0
    return x, law.pdf(x)


def write_density_csv(law: SpectralDensity, path: str | Path, points: int = 1000) -> tuple[Path, Path]:
    """Write ``x,f(x)`` to ``path`` and the atoms to ``<stem>.atoms.csv`` next to it."""
    path = Path(path)
    x, f = density_curve(law, points)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density"])
        w.writerows(zip((repr(float(v)) for v in x), (repr(float(v)) for v in f)))
    atoms_path = path.with_name(path.stem + ".atoms.csv")
    with atoms_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location", "weight"])
        w.writerows((repr(loc), repr(wt)) for loc, wt in law.atoms)
    return path, atoms_path


def histogram(samples: Sequence[float], upper: float, bins: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Density-normalized histogram on ``[0, 1.05 * max(upper, max sample)]``."""
    x = np.asarray(samples, float)
    edges = np.linspace(0.0, max(upper, float(x.max())) * 1.05, bins + 1)
    counts = np.histogram(x, edges)[0]
    return edges, counts / (x.size * np.diff(edges))
