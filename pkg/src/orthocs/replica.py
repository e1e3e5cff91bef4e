"""Asymptotic LASSO MSE for structurally orthogonal ensembles.

The large-system error is characterized by a set of coupled fixed-point
equations in per-column-block order parameters.  Each column block ``p``
behaves like the scalar channel ``y = m_hat_p * x0 + sqrt(chi_hat_p) * z``
followed by soft thresholding at ``1/2`` (complex) and rescaling by
``1 / m_hat_p``.  Row blocks couple the column blocks through the auxiliary
variables ``Gamma*_{q,p}`` and ``Delta_{q,p}``.

State is ``(chi_p, chi_hat_p)``.  Given ``chi`` the row-block equations

    Delta_qp = nu_q (R_qp / Gamma_qp) / (lam + sum_l R_ql / Gamma_ql)
    Gamma_qp = (1 - Delta_qp) / chi_p

are solved exactly (see :func:`solve_row_block`), which yields
``m_hat_p = sum_q Delta_qp / chi_p``.  The scalar channel then gives
``m_p``, ``Q_p`` and a new ``chi_p``; the derivative of ``Gamma*`` with
respect to ``chi`` feeds the ``chi_hat`` update.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .model import Field

logger = logging.getLogger(__name__)

_TINY = 1e-300
_SERIES_CUTOFF = 1e-3
_SERIES_TERMS = 14


class ReplicaError(RuntimeError):
    """The fixed-point system has no admissible solution at the given state."""


def to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


# ---------------------------------------------------------------------------
# scalar functions


def q_function(xi):
    """Gaussian upper tail probability ``P(Z > xi)``."""
    return 0.5 * special.erfc(np.asarray(xi, float) / math.sqrt(2.0))


def _zeta(zeta) -> np.ndarray:
    z = np.asarray(zeta, float)
    if np.any(~(z > 0)):
        raise ValueError("zeta must be positive")
    return z


def _asymptotic(z: np.ndarray, coeff: Callable[[int], float]) -> np.ndarray:
    """``sum_k coeff(k) * z**k`` for ``k >= 2``; the small-``zeta`` tails below."""
    out = np.zeros_like(z)
    for k in range(_SERIES_TERMS, 1, -1):
        out = (out + coeff(k)) * z
    return out * z


def _double_factorial_odd(k: int) -> float:
    """``(2k - 1)!!`` with ``(-1)!! = 1``."""
    return float(np.prod(np.arange(1, 2 * k, 2))) if k > 0 else 1.0


def _erfcx_series_coeff(k: int) -> float:
    return (-1) ** k * _double_factorial_odd(k)


def _scalar_eval(zeta, fn_large, fn_small):
    z = _zeta(zeta)
    zs = np.atleast_1d(z)
    out = np.zeros_like(zs)
    big = zs >= _SERIES_CUTOFF
    mid = (zs > _TINY) & ~big
    if np.any(big):
        out[big] = fn_large(zs[big])
    if np.any(mid):
        out[mid] = fn_small(zs[mid])
    return out.reshape(z.shape)[()] if z.ndim == 0 else out.reshape(z.shape)


def g_c(zeta):
    r"""``zeta e^{-1/(4 zeta)} - sqrt(pi zeta) Q(1/sqrt(2 zeta))``.

    Equals ``E[(|y| - 1/2)_+^2]`` for ``y`` circular complex Gaussian with
    variance ``zeta``.  Both terms vanish like ``zeta e^{-1/(4 zeta)}`` and
    cancel to leading order, so small arguments use the asymptotic expansion
    of ``erfcx``.
    """

    def large(z):
        s = 0.5 / np.sqrt(z)
        return np.exp(-0.25 / z) * (z - 0.5 * np.sqrt(np.pi * z) * special.erfcx(s))

    def small(z):
        # 1 - sum_k c_k (2z)^k = -sum_{k>=1} c_k (2z)^k
        tail = -_asymptotic(2 * z, _erfcx_series_coeff) - _erfcx_series_coeff(1) * 2 * z
        return np.exp(-0.25 / z) * z * tail

    return _scalar_eval(zeta, large, small)


def g_c_prime(zeta):
    """Derivative of :func:`g_c`: ``e^{-1/(4 zeta)} - sqrt(pi/(4 zeta)) Q(1/sqrt(2 zeta))``."""

    def fn(z):
        # no cancellation here: the bracket tends to 1/2 as zeta -> 0
        s = 0.5 / np.sqrt(z)
        return np.exp(-0.25 / z) * (1.0 - 0.5 * np.sqrt(np.pi) * s * special.erfcx(s))

    return _scalar_eval(zeta, fn, fn)


def g_r(zeta):
    """Real-field counterpart of :func:`g_c`; ``E[(|y| - 1)_+^2]`` for ``y ~ N(0, zeta)``."""

    def large(z):
        u = 1.0 / np.sqrt(2 * z)
        return 2 * np.exp(-0.5 / z) * ((1 + z) * 0.5 * special.erfcx(u) - np.sqrt(z / (2 * np.pi)))

    def small(z):
        # (1 + z) * sum_k a_k z^k - 1 with a_k = (-1)^k (2k-1)!!
        coeff = lambda k: _erfcx_series_coeff(k) + _erfcx_series_coeff(k - 1)  # noqa: E731
        return 2 * np.exp(-0.5 / z) * np.sqrt(z / (2 * np.pi)) * _asymptotic(z, coeff)

    return _scalar_eval(zeta, large, small)


def g_r_prime(zeta):
    """Derivative of :func:`g_r`, ``2 Q(1/sqrt(zeta))``."""
    return _scalar_eval(zeta, lambda z: 2 * q_function(1 / np.sqrt(z)), lambda z: 2 * q_function(1 / np.sqrt(z)))


_G_FUNCTIONS = {
    Field.COMPLEX: (g_c, g_c_prime),
    Field.REAL: (g_r, g_r_prime),
}


def scalar_channel_mse(m_hat, chi_hat, rho_x, mu_p, mu, field: Field = Field.COMPLEX):
    """Overlap ``m_p``, power ``Q_p`` and error share ``mse_p`` of one column block.

    ``m_p = mu_p E[Re(x_hat* x0)]`` and ``Q_p = mu_p E|x_hat|^2`` for the
    thresholding estimator on the effective scalar channel; ``mse_p`` is the
    block's contribution to the normalized total error.
    """
    if np.any(np.asarray(m_hat) <= 0) or np.any(np.asarray(chi_hat) <= 0):
        raise ValueError("m_hat and chi_hat must be positive")
    g, gp = _G_FUNCTIONS[Field(field)]
    eff = m_hat ** 2 + chi_hat
    m = mu_p * rho_x * gp(eff)
    q = mu_p * ((1 - rho_x) * g(chi_hat) + rho_x * g(eff)) / m_hat ** 2
    return m, q, (mu_p * rho_x - 2 * m + q) / mu


def scalar_channel_estimate(y, m_hat, field: Field = Field.COMPLEX):
    """Thresholding estimator of the scalar channel (threshold 1/2 complex, 1 real)."""
    thresh = 0.5 if Field(field) is Field.COMPLEX else 1.0
    y = np.asarray(y)
    mag = np.abs(y)
    scale = np.zeros(mag.shape)
    np.divide(mag - thresh, mag, out=scale, where=mag > thresh)
    return y * scale / m_hat


def _chi_from_channel(m_hat, chi_hat, rho_x, mu_p, field):
    _, gp = _G_FUNCTIONS[Field(field)]
    return mu_p * ((1 - rho_x) * gp(chi_hat) + rho_x * gp(m_hat ** 2 + chi_hat)) / m_hat


# ---------------------------------------------------------------------------
# problem description and solution


@dataclass(frozen=True)
class ReplicaSpec:
    nu: tuple[float, ...]
    mu: tuple[float, ...]
    gains: tuple[tuple[float, ...], ...]
    lam: float
    sigma0_sq: float
    rho_x: float
    field: Field = Field.COMPLEX

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "nu", tuple(float(v) for v in np.atleast_1d(self.nu)))
        set_(self, "mu", tuple(float(v) for v in np.atleast_1d(self.mu)))
        gains = np.asarray(self.gains, float)
        if gains.shape != (len(self.nu), len(self.mu)):
            raise ValueError(f"gains grid has shape {gains.shape}, expected {(len(self.nu), len(self.mu))}")
        if np.any(gains < 0):
            raise ValueError("gains must be nonnegative")
        set_(self, "gains", tuple(tuple(float(g) for g in row) for row in gains))
        set_(self, "field", Field(self.field))
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.sigma0_sq < 0:
            raise ValueError("sigma0_sq must be nonnegative")
        if not 0 <= self.rho_x <= 1:
            raise ValueError("rho_x must lie in [0, 1]")
        if any(v <= 0 for v in self.nu + self.mu):
            raise ValueError("selection rates must be positive")
        for p in range(len(self.mu)):
            if not np.any(gains[:, p] > 0):
                raise ValueError(f"column block {p} is not measured by any row block")
        if self.rho_x == 0 and self.sigma0_sq == 0:
            raise ValueError("zero signal and zero noise: the estimate is exactly zero and the fixed point degenerates")

    @property
    def l_r(self) -> int:
        return len(self.nu)

    @property
    def l_c(self) -> int:
        return len(self.mu)

    @property
    def mu_total(self) -> float:
        return float(sum(self.mu))

    @property
    def nu_total(self) -> float:
        return float(sum(self.nu))

    @property
    def alpha(self) -> float:
        return self.nu_total / self.mu_total

    @property
    def gain_array(self) -> np.ndarray:
        return np.array(self.gains, float)

    @property
    def channel_lam(self) -> float:
        """Regularization entering the fixed-point equations.

        ``lam`` always refers to the objective ``(1/lam)||y - Ax||^2 + ||x||_1``.
        The real-field scalar channel thresholds at 1 rather than 1/2, which
        corresponds to the objective with ``lam / 2``.
        """
        return self.lam if self.field is Field.COMPLEX else 0.5 * self.lam

    @classmethod
    def from_ensemble(cls, ensemble, lam: float, sigma0_sq: float, rho_x: float) -> "ReplicaSpec":
        return cls(ensemble.nu, ensemble.mu, ensemble.gains, lam, sigma0_sq, rho_x, ensemble.field)


@dataclass
class ReplicaSolution:
    chi: np.ndarray
    chi_hat: np.ndarray
    m_hat: np.ndarray
    m: np.ndarray
    Q: np.ndarray
    mse: np.ndarray
    gamma_star: np.ndarray
    delta: np.ndarray
    total_mse: float
    residual: float
    iterations: int
    converged: bool
    method: str = "damped"
    spec: ReplicaSpec | None = field(default=None, repr=False)

    @property
    def total_mse_db(self) -> float:
        return to_db(self.total_mse)


# ---------------------------------------------------------------------------
# row-block equations


def solve_row_block(chi: np.ndarray, nu_q: float, gains_q: np.ndarray, lam: float):
    """Solve the ``Gamma*``/``Delta`` equations of one row block for fixed ``chi``.

    With ``S = sum_l R_ql / Gamma_ql`` each ``Gamma_qp`` solves
    ``chi_p G^2 - G + nu_q R_qp / (lam + S) = 0``; the root with
    ``Delta_qp < 1/2`` is taken.  ``S`` itself is the unique root of the
    increasing function ``S - sum_p R_qp / Gamma_qp(S)``, found by bracketing.
    Blocks with zero gain get ``Delta = 0`` and ``Gamma = 1/chi``.
    """
    chi = np.asarray(chi, float)
    gains_q = np.asarray(gains_q, float)

    def gamma(s):
        disc = 1.0 - 4.0 * chi * nu_q * gains_q / (lam + s)
        return (1.0 + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * chi)

    def f(s):
        return s - np.sum(gains_q / gamma(s))

    lo = max(float(np.max(4.0 * chi * nu_q * gains_q)) - lam, 0.0)
    if f(lo) > 0:
        raise ReplicaError("row block has no solution with Delta < 1/2 at this chi")
    hi = max(lo * 2.0, 1.0)
    while f(hi) < 0:
        hi *= 2.0
    s = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    g = gamma(s)
    d = nu_q * gains_q / (g * (lam + s))
    return g, d


def gamma_derivative(gamma_q: np.ndarray, delta_q: np.ndarray, nu_q: float) -> np.ndarray:
    """Matrix ``dGamma*_qp / dchi_r`` of one row block (inverse of the Jacobian by the matrix inversion lemma)."""
    denom = 1.0 - 2.0 * delta_q
    if np.any(denom <= 0):
        bad = int(np.argmax(denom <= 0))
        raise ReplicaError(f"Delta of column block {bad} reached 1/2; Gamma derivative is singular")
    a = delta_q * gamma_q / denom
    coupling = 1.0 + np.sum(delta_q ** 2 / denom) / nu_q
    return np.outer(a, a) / (nu_q * coupling) - np.diag(gamma_q ** 2 / denom)


@dataclass
class _Evaluation:
    chi_new: np.ndarray
    chi_hat_new: np.ndarray
    m_hat: np.ndarray
    m: np.ndarray
    Q: np.ndarray
    mse: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray


def _evaluate(spec: ReplicaSpec, chi: np.ndarray, chi_hat: np.ndarray) -> _Evaluation:
    """One sweep of the fixed-point map at state ``(chi, chi_hat)``.

    Trial states far from the solution can overflow; callers reject
    non-finite images, so floating-point warnings are silenced here.
    """
    with np.errstate(all="ignore"):
        return _evaluate_raw(spec, chi, chi_hat)


def _evaluate_raw(spec: ReplicaSpec, chi: np.ndarray, chi_hat: np.ndarray) -> _Evaluation:
    gains = spec.gain_array
    mu = np.array(spec.mu)
    gamma = np.zeros_like(gains)
    delta = np.zeros_like(gains)
    for q, nu_q in enumerate(spec.nu):
        gamma[q], delta[q] = solve_row_block(chi, nu_q, gains[q], spec.channel_lam)
    m_hat = delta.sum(axis=0) / chi
    m, Q, mse = scalar_channel_mse(m_hat, chi_hat, spec.rho_x, mu, spec.mu_total, spec.field)
    chi_new = _chi_from_channel(m_hat, chi_hat, spec.rho_x, mu, spec.field)
    # The chi_hat update uses the un-normalized block error mu_p rho - 2 m_p + Q_p.
    err = mu * spec.rho_x - 2 * m + Q
    noise = spec.sigma0_sq / spec.channel_lam
    chi_hat_new = np.zeros_like(chi)
    for q, nu_q in enumerate(spec.nu):
        dgam = gamma_derivative(gamma[q], delta[q], nu_q)
        chi_hat_new += dgam @ (err - noise * chi) + err / chi ** 2 - noise * gamma[q]
    return _Evaluation(chi_new, chi_hat_new, m_hat, m, Q, mse, gamma, delta)


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old) / np.abs(old)))


def initial_state(spec: ReplicaSpec) -> tuple[np.ndarray, np.ndarray]:
    """Starting point inside the region where every row block is solvable.

    ``chi_p < lam / (4 nu_q R_qp)`` for all ``q`` guarantees a row-block
    solution with ``Delta < 1/2``; ``chi_hat`` starts at the prior power.
    """
    gains = spec.gain_array
    nu = np.array(spec.nu)[:, None]
    cap = np.min(np.where(gains > 0, spec.channel_lam / (8.0 * nu * np.where(gains > 0, gains, 1.0)), np.inf), axis=0)
    chi = np.minimum(np.array(spec.mu), cap)
    chi_hat = np.full(spec.l_c, max(spec.rho_x, 1e-3))
    return chi, chi_hat


def _package(spec, chi, chi_hat, ev: _Evaluation, residual, iterations, converged, method) -> ReplicaSolution:
    return ReplicaSolution(
        chi=chi.copy(),
        chi_hat=chi_hat.copy(),
        m_hat=ev.m_hat,
        m=ev.m,
        Q=ev.Q,
        mse=ev.mse,
        gamma_star=ev.gamma,
        delta=ev.delta,
        total_mse=float(np.sum(ev.mse)),
        residual=residual,
        iterations=iterations,
        converged=converged,
        method=method,
        spec=spec,
    )


def _damped_iteration(spec, chi, chi_hat, theta, tol, max_iters, max_halvings):
    """Damped fixed-point sweeps; the step is halved whenever the residual grows."""
    halvings = 0
    prev = math.inf
    best = (math.inf, chi, chi_hat)
    for it in range(1, max_iters + 1):
        try:
            ev = _evaluate(spec, chi, chi_hat)
        except ReplicaError:
            return best, it, False
        ok = np.all(ev.chi_new > 0) and np.all(ev.chi_hat_new > 0) and np.all(np.isfinite(ev.chi_hat_new))
        if not ok:
            return best, it, False
        res = max(_relative_change(ev.chi_new, chi), _relative_change(ev.chi_hat_new, chi_hat))
        if res < best[0]:
            best = (res, chi, chi_hat)
        if res < tol:
            return best, it, True
        if res > prev and halvings < max_halvings:
            theta *= 0.5
            halvings += 1
        prev = res
        chi = (1 - theta) * chi + theta * ev.chi_new
        chi_hat = (1 - theta) * chi_hat + theta * ev.chi_hat_new
    return best, max_iters, False


def _fallback_starts(spec: ReplicaSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Grid of starting points for the root solve, scaled to ``lam``."""
    chi0, _ = initial_state(spec)
    out = []
    for c in (1.0, 0.1, 10.0, 0.01):
        for h in (1e-2, 0.1, 1.0, 10.0, 1e-3):
            out.append((np.maximum(chi0, c * spec.channel_lam), np.full(spec.l_c, h)))
    return out


def _root_polish(spec, chi, chi_hat, tol):
    """Newton-type solve of ``F(s) = s`` in log variables (fallback path)."""
    lc = spec.l_c

    def residual(v):
        c, h = np.exp(v[:lc]), np.exp(v[lc:])
        try:
            ev = _evaluate(spec, c, h)
        except ReplicaError:
            return np.full(2 * lc, 1e3)
        out = np.concatenate([ev.chi_new, ev.chi_hat_new])
        if np.any(~(out > 0)) or not np.all(np.isfinite(out)):
            return np.full(2 * lc, 1e3)
        return np.log(out) - v

    sol = optimize.root(residual, np.log(np.concatenate([chi, chi_hat])), method="hybr", options={"xtol": 1e-14})
    r = residual(sol.x)
    # log-residual is the relative change to first order
    res = float(np.max(np.abs(np.expm1(r))))
    return np.exp(sol.x[:lc]), np.exp(sol.x[lc:]), res, int(sol.nfev), res < tol


def solve_general(
    spec: ReplicaSpec,
    *,
    theta: float = 0.5,
    tol: float = 1e-10,
    max_iters: int = 150,
    max_halvings: int = 4,
    init: tuple[Sequence[float], Sequence[float]] | None = None,
) -> ReplicaSolution:
    """Solve the fixed-point system for an arbitrary block grid.

    Damped iteration on ``(chi, chi_hat)`` runs first.  If it stalls, leaves
    the admissible region, or uses up its ``max_iters`` budget, a hybrid
    Powell root solve is started from the best state seen (then from a small
    grid).  The short default budget just brings the state near the fixed
    point; the root solve converges much faster from there.  A system that still does not
    converge is returned with ``converged=False``; ``ReplicaError`` is raised
    only if no admissible state could be evaluated at all.
    """
    if init is None:
        chi, chi_hat = initial_state(spec)
    else:
        chi, chi_hat = (np.asarray(v, float).copy() for v in init)
    (best_res, b_chi, b_chi_hat), iters, ok = _damped_iteration(spec, chi, chi_hat, theta, tol, max_iters, max_halvings)
    method = "damped"
    if not ok:
        starts = [(b_chi, b_chi_hat)] if math.isfinite(best_res) else []
        starts += _fallback_starts(spec)
        for start_chi, start_hat in starts:
            p_chi, p_hat, p_res, nfev, p_ok = _root_polish(spec, start_chi, start_hat, tol)
            iters += nfev
            if p_ok or p_res < best_res:
                b_chi, b_chi_hat, best_res, ok = p_chi, p_hat, p_res, p_ok
                method = "root"
            if ok:
                break
        if not ok:
            logger.warning("replica fixed point did not converge (residual %.3g)", best_res)
    ev = _evaluate(spec, b_chi, b_chi_hat)
    if ok:
        # report the image of the converged state so every equation is satisfied to the residual
        b_chi, b_chi_hat = ev.chi_new, ev.chi_hat_new
        ev = _evaluate(spec, b_chi, b_chi_hat)
        best_res = max(_relative_change(ev.chi_new, b_chi), _relative_change(ev.chi_hat_new, b_chi_hat))
    return _package(spec, b_chi, b_chi_hat, ev, best_res, iters, ok, method)


def fixed_point_residual(sol: ReplicaSolution, spec: ReplicaSpec | None = None) -> float:
    """Re-evaluate every equation at ``sol`` and return the worst relative mismatch."""
    spec = spec or sol.spec
    ev = _evaluate(spec, sol.chi, sol.chi_hat)
    checks = [
        _relative_change(ev.chi_new, sol.chi),
        _relative_change(ev.chi_hat_new, sol.chi_hat),
        _relative_change(ev.m_hat, sol.m_hat),
        _relative_change(ev.gamma[ev.gamma > 0], sol.gamma_star[ev.gamma > 0]),
    ]
    return max(checks)


def find_fixed_points(spec: ReplicaSpec, inits: Sequence[tuple], rtol: float = 1e-6) -> list[ReplicaSolution]:
    """Solve from several starting points and return the distinct converged solutions."""
    found: list[ReplicaSolution] = []
    for init in inits:
        try:
            sol = solve_general(spec, init=init)
        except ReplicaError:
            continue
        if not sol.converged:
            continue
        if all(abs(sol.total_mse - f.total_mse) > rtol * f.total_mse for f in found):
            found.append(sol)
    return found


# ---------------------------------------------------------------------------
# single-block (row/column selected) specializations


def type_b_closed_forms(chi: float, lam: float, nu: float, R: float):
    """``(m_hat, Gamma*, dGamma*/dchi)`` for a single block, in closed form.

    Eliminating ``Delta`` from the single-block row equations gives
    ``lam chi G^2 + (R chi - lam) G - R (1 - nu) = 0`` whose positive root is

        G = (lam - R chi + sqrt(D)) / (2 lam chi),
        m_hat = 1/chi - G = (lam + R chi - sqrt(D)) / (2 lam chi),
        D = (lam + R chi)^2 - 4 lam nu R chi.
    """
    disc = (lam + R * chi) ** 2 - 4.0 * lam * nu * R * chi
    if disc < -1e-12 * (lam + R * chi) ** 2:
        raise ReplicaError(f"no real saddle point: discriminant {disc:.3g} < 0")
    root = math.sqrt(max(disc, 0.0))
    g = (lam - R * chi + root) / (2.0 * lam * chi)
    m_hat = (lam + R * chi - root) / (2.0 * lam * chi)
    delta = chi * m_hat
    dg = -nu * g * g / (nu * (1.0 - 2.0 * delta) + delta * delta)
    return m_hat, g, dg


def solve_type_b(
    alpha: float,
    mu: float,
    nu: float | None = None,
    R: float | None = None,
    *,
    lam: float,
    sigma0_sq: float,
    rho_x: float,
    field: Field = Field.COMPLEX,
    theta: float = 0.5,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> ReplicaSolution:
    """Two-variable fixed point for ``mu * N`` columns and ``nu * N`` rows of one transform.

    ``nu`` defaults to ``alpha * mu`` and ``R`` to the power-normalizing
    ``1 / mu``.
    """
    nu = alpha * mu if nu is None else nu
    R = 1.0 / mu if R is None else R
    if not (0 < mu <= 1 and 0 < nu <= 1 and R > 0):
        raise ValueError("need 0 < mu <= 1, 0 < nu <= 1 and R > 0")
    if abs(nu - alpha * mu) > 1e-12:
        raise ValueError(f"nu={nu} inconsistent with alpha*mu={alpha * mu}")
    spec = ReplicaSpec((nu,), (mu,), ((R,),), lam, sigma0_sq, rho_x, field)
    field = spec.field
    lam = spec.channel_lam
    g, gp = _G_FUNCTIONS[field]
    noise = sigma0_sq / lam

    def step(chi, chi_hat):
        m_hat, gam, dgam = type_b_closed_forms(chi, lam, nu, R)
        m, Q, mse = scalar_channel_mse(m_hat, chi_hat, rho_x, mu, mu, field)
        err = mu * rho_x - 2 * m + Q
        chi_new = _chi_from_channel(m_hat, chi_hat, rho_x, mu, field)
        chi_hat_new = err * (dgam + 1.0 / chi ** 2) - noise * (chi * dgam + gam)
        return chi_new, chi_hat_new

    chi, chi_hat = initial_state(spec)
    chi, chi_hat = float(chi[0]), float(chi_hat[0])
    converged = False
    res = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        try:
            c_new, h_new = step(chi, chi_hat)
        except ReplicaError:
            break
        if not (c_new > 0 and h_new > 0 and math.isfinite(h_new)):
            break
        res = max(abs(c_new - chi) / chi, abs(h_new - chi_hat) / chi_hat)
        if res < tol:
            converged = True
            chi, chi_hat = c_new, h_new
            break
        chi = (1 - theta) * chi + theta * c_new
        chi_hat = (1 - theta) * chi_hat + theta * h_new
    if not converged:
        # hard cases (very low SNR) are handed to the general solver's fallback
        return solve_general(spec, theta=theta, tol=tol)
    ev = _evaluate(spec, np.array([chi]), np.array([chi_hat]))
    res = max(_relative_change(ev.chi_new, np.array([chi])), _relative_change(ev.chi_hat_new, np.array([chi_hat])))
    return _package(spec, np.array([chi]), np.array([chi_hat]), ev, res, it, res < 10 * tol, "closed-form")


def solve_type_a(
    alpha: float,
    *,
    legacy_scale: bool = False,
    lam: float,
    sigma0_sq: float,
    rho_x: float,
    field: Field = Field.COMPLEX,
    **kw,
) -> ReplicaSolution:
    """Row-orthonormal case (all columns kept).

    The power-normalized gain is ``R = 1``; ``legacy_scale=True`` uses
    ``R = 1/alpha`` (so ``nu R = 1``), the convention of earlier real-valued
    analyses of row-orthogonal matrices.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    R = 1.0 / alpha if legacy_scale else 1.0
    return solve_type_b(alpha, 1.0, alpha, R, lam=lam, sigma0_sq=sigma0_sq, rho_x=rho_x, field=field, **kw)
