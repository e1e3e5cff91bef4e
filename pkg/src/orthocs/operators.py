"""Structurally orthogonal measurement operators.

A structured operator is an ``L_r x L_c`` grid of blocks.  Block ``(q, p)``
is ``sqrt(R[q][p])`` times ``M_q`` rows and ``N_p`` columns of an
independently scrambled ``N x N`` orthonormal transform (DFT, DCT or a Haar
random unitary).  Scrambling means independent uniform permutations of the
rows and of the columns; the leading ``M_q`` / ``N_p`` indices are kept.

The fast path never forms the matrix: ``x_p`` is scattered into ``N`` slots,
transformed, and ``M_q`` entries are gathered.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.fft

from .model import Field, SeedLike, make_rng, standard_normal

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 4096 * 4096


class SizeCapError(ValueError):
    """Raised when a dense materialization would exceed the configured cap."""


class Kind(str, enum.Enum):
    STRUCTURED = "structured"
    GAUSSIAN_IID = "gaussian_iid"


class BaseTransform(str, enum.Enum):
    DFT = "dft"
    DCT = "dct"
    HAAR = "haar"


def _as_count(rate: float, n: int, what: str) -> int:
    count = rate * n
    rounded = round(count)
    if abs(count - rounded) > 1e-9 * max(1.0, abs(count)):
        raise ValueError(f"{what} rate {rate} times N={n} is not an integer ({count})")
    return int(rounded)


def power_normalized_gains(nu: Sequence[float], mu: Sequence[float], mask=None) -> np.ndarray:
    """Uniform gain on the nonzero blocks so that ``E tr(A A^H) = M_bar``.

    ``E tr(A_qp A_qp^H) = R M_q N_p / N``, so the uniform gain is
    ``sum(nu) / sum_{(q,p) in mask} nu_q mu_p``.  With every block present
    this is ``1 / sum(mu)``.  For DFT bases all entries have modulus
    ``1/sqrt(N)`` and the trace identity is exact, not just in expectation.
    """
    nu = np.asarray(nu, float)
    mu = np.asarray(mu, float)
    if mask is None:
        mask = np.ones((nu.size, mu.size), bool)
    mask = np.asarray(mask, bool)
    covered = float(np.sum(np.outer(nu, mu)[mask]))
    if covered <= 0:
        raise ValueError("mask selects no nonzero block")
    return np.where(mask, nu.sum() / covered, 0.0)


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a block-structured (or i.i.d. Gaussian) ensemble.

    Rates are relative to ``base_n``: ``M_q = nu[q] * base_n`` and
    ``N_p = mu[p] * base_n``.  For ``Kind.GAUSSIAN_IID`` the block grid only
    fixes ``M_bar`` and ``N_bar``; gains are ignored.
    """

    base_n: int
    nu: tuple[float, ...]
    mu: tuple[float, ...]
    gains: tuple[tuple[float, ...], ...] | None = None
    base_transform: BaseTransform = BaseTransform.DFT
    field: Field = Field.COMPLEX
    kind: Kind = Kind.STRUCTURED

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "nu", tuple(float(v) for v in np.atleast_1d(self.nu)))
        set_(self, "mu", tuple(float(v) for v in np.atleast_1d(self.mu)))
        set_(self, "base_transform", BaseTransform(self.base_transform))
        set_(self, "field", Field(self.field))
        set_(self, "kind", Kind(self.kind))
        if self.base_n < 1:
            raise ValueError("base_n must be positive")
        if not self.nu or not self.mu:
            raise ValueError("nu and mu must be nonempty")
        if self.kind is Kind.STRUCTURED and any(not 0 < v <= 1 for v in self.nu + self.mu):
            raise ValueError("structured selection rates must lie in (0, 1]")
        gains = self.gains
        if gains is None:
            gains = power_normalized_gains(self.nu, self.mu)
        gains = np.asarray(gains, float)
        if gains.shape != (len(self.nu), len(self.mu)):
            raise ValueError(f"gains grid has shape {gains.shape}, expected {(len(self.nu), len(self.mu))}")
        if np.any(gains < 0) or not np.all(np.isfinite(gains)):
            raise ValueError("gains must be finite and nonnegative")
        set_(self, "gains", tuple(tuple(float(g) for g in row) for row in gains))
        _ = (self.m_sizes, self.n_sizes)  # raises on non-integral block sizes
        if self.base_transform is BaseTransform.DFT and self.field is Field.REAL and self.kind is Kind.STRUCTURED:
            raise ValueError("the DFT base requires the complex field")
        if self.m_bar > self.n_bar:
            warnings.warn(f"M_bar={self.m_bar} exceeds N_bar={self.n_bar}; not a compressed-sensing instance")

    @property
    def l_r(self) -> int:
        return len(self.nu)

    @property
    def l_c(self) -> int:
        return len(self.mu)

    @property
    def m_sizes(self) -> tuple[int, ...]:
        return tuple(_as_count(v, self.base_n, "row selection") for v in self.nu)

    @property
    def n_sizes(self) -> tuple[int, ...]:
        return tuple(_as_count(v, self.base_n, "column selection") for v in self.mu)

    @property
    def m_bar(self) -> int:
        return sum(self.m_sizes)

    @property
    def n_bar(self) -> int:
        return sum(self.n_sizes)

    @property
    def mu_total(self) -> float:
        return float(sum(self.mu))

    @property
    def nu_total(self) -> float:
        return float(sum(self.nu))

    @property
    def alpha(self) -> float:
        return self.m_bar / self.n_bar

    @property
    def gain_array(self) -> np.ndarray:
        return np.array(self.gains, float)

    def with_base_n(self, base_n: int) -> "EnsembleSpec":
        return EnsembleSpec(base_n, self.nu, self.mu, self.gains, self.base_transform, self.field, self.kind)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "base_n": self.base_n,
            "nu": list(self.nu),
            "mu": list(self.mu),
            "gains": [list(row) for row in self.gains],
            "base_transform": self.base_transform.value,
            "field": self.field.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnsembleSpec":
        data = dict(data)
        return cls(
            base_n=int(data["base_n"]),
            nu=tuple(data["nu"]),
            mu=tuple(data["mu"]),
            gains=data.get("gains"),
            base_transform=data.get("base_transform", "dft"),
            field=data.get("field", "complex"),
            kind=data.get("kind", "structured"),
        )

    # Convenience constructors for the standard ensembles.

    @classmethod
    def type_a(cls, base_n: int, alpha: float, *, gain: float = 1.0, **kw) -> "EnsembleSpec":
        """Row-orthonormal: ``alpha * N`` rows of one ``N x N`` transform."""
        return cls(base_n, (alpha,), (1.0,), ((gain,),), **kw)

    @classmethod
    def type_b(cls, base_n: int, mu: float, nu: float, *, gain: float | None = None, **kw) -> "EnsembleSpec":
        """Rows and columns selected from one transform; default gain ``1/mu``."""
        gain = 1.0 / mu if gain is None else gain
        return cls(base_n, (nu,), (mu,), ((gain,),), **kw)

    @classmethod
    def type_c(cls, base_n: int, mu: Sequence[float], nu: Sequence[float], mask=None, **kw) -> "EnsembleSpec":
        """Grid of independently scrambled blocks with power-normalized gains."""
        return cls(base_n, tuple(nu), tuple(mu), power_normalized_gains(nu, mu, mask), **kw)

    @classmethod
    def gaussian(cls, n_bar: int, alpha: float, *, field: Field = Field.COMPLEX) -> "EnsembleSpec":
        return cls(n_bar, (alpha,), (1.0,), ((1.0,),), BaseTransform.DFT, field, Kind.GAUSSIAN_IID)


class MeasurementOperator:
    """Common interface: ``apply``, ``adjoint``, ``materialize`` and shape data.

    Inputs may be vectors of length ``n_bar`` (resp. ``m_bar``) or 2-D arrays
    whose first axis has that length; columns are treated independently.
    """

    m_bar: int
    n_bar: int
    field: Field

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m_bar, self.n_bar)

    @property
    def dtype(self) -> np.dtype:
        return self.field.dtype

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_bound(self) -> float:
        """Upper bound on the largest eigenvalue of ``A^H A``."""
        raise NotImplementedError

    def _check(self, v: np.ndarray, n: int, what: str) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim not in (1, 2) or v.shape[0] != n:
            raise ValueError(f"{what} expects leading dimension {n}, got shape {v.shape}")
        if self.field is Field.REAL and np.iscomplexobj(v):
            raise ValueError("complex input to a real-field operator")
        return v

    def materialize(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        if self.m_bar * self.n_bar > cap:
            raise SizeCapError(f"{self.m_bar}x{self.n_bar} matrix exceeds the dense cap of {cap} entries")
        out = np.empty((self.m_bar, self.n_bar), self.dtype)
        chunk = max(1, min(self.n_bar, (1 << 22) // max(self.m_bar, 1)))
        for start in range(0, self.n_bar, chunk):
            stop = min(start + chunk, self.n_bar)
            eye = np.zeros((self.n_bar, stop - start), self.dtype)
            eye[np.arange(start, stop), np.arange(stop - start)] = 1
            out[:, start:stop] = self.apply(eye)
        return out


class DenseOperator(MeasurementOperator):
    """Explicit matrix; used for the i.i.d. Gaussian baseline and in tests."""

    def __init__(self, matrix: np.ndarray, spec: EnsembleSpec | None = None):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        self.matrix = matrix
        self.spec = spec
        self.m_bar, self.n_bar = matrix.shape
        self.field = Field.COMPLEX if np.iscomplexobj(matrix) else Field.REAL
        self._norm_sq: float | None = None

    def apply(self, x):
        return self.matrix @ self._check(x, self.n_bar, "apply")

    def adjoint(self, y):
        return self.matrix.conj().T @ self._check(y, self.m_bar, "adjoint")

    def materialize(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        if self.m_bar * self.n_bar > cap:
            raise SizeCapError(f"{self.m_bar}x{self.n_bar} matrix exceeds the dense cap of {cap} entries")
        return self.matrix.copy()

    def lipschitz_bound(self) -> float:
        if self._norm_sq is None:
            self._norm_sq = float(np.linalg.norm(self.matrix, 2)) ** 2 * (1 + 1e-12)
        return self._norm_sq


@dataclass(frozen=True)
class _Block:
    q: int
    p: int
    scale: float
    rows: np.ndarray
    cols: np.ndarray
    unitary: np.ndarray | None = field(default=None, repr=False)


def haar_unitary(n: int, seed: SeedLike = None, field: Field = Field.COMPLEX) -> np.ndarray:
    """Haar-distributed unitary (orthogonal for the real field) via phase-corrected QR."""
    rng = make_rng(seed)
    z = standard_normal(rng, (n, n), field)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


class StructuredOperator(MeasurementOperator):
    def __init__(self, spec: EnsembleSpec, blocks: list[_Block]):
        self.spec = spec
        self.blocks = blocks
        self.m_bar, self.n_bar = spec.m_bar, spec.n_bar
        self.field = spec.field
        self._row_off = np.concatenate([[0], np.cumsum(spec.m_sizes)])
        self._col_off = np.concatenate([[0], np.cumsum(spec.n_sizes)])

    def _forward(self, z: np.ndarray, block: _Block) -> np.ndarray:
        tr = self.spec.base_transform
        if block.unitary is not None:
            return block.unitary @ z
        if tr is BaseTransform.DFT:
            return scipy.fft.fft(z, axis=0, norm="ortho")
        return scipy.fft.dct(z, type=2, axis=0, norm="ortho")

    def _backward(self, z: np.ndarray, block: _Block) -> np.ndarray:
        tr = self.spec.base_transform
        if block.unitary is not None:
            return block.unitary.conj().T @ z
        if tr is BaseTransform.DFT:
            return scipy.fft.ifft(z, axis=0, norm="ortho")
        return scipy.fft.idct(z, type=2, axis=0, norm="ortho")

    def apply(self, x):
        x = self._check(x, self.n_bar, "apply")
        n = self.spec.base_n
        out = np.zeros((self.m_bar,) + x.shape[1:], self.dtype)
        # fixed block order keeps the summation deterministic
        for b in self.blocks:
            xp = x[self._col_off[b.p]:self._col_off[b.p + 1]]
            z = np.zeros((n,) + x.shape[1:], self.dtype)
            z[b.cols] = xp
            w = self._forward(z, b)
            out[self._row_off[b.q]:self._row_off[b.q + 1]] += b.scale * w[b.rows]
        return out

    def adjoint(self, y):
        y = self._check(y, self.m_bar, "adjoint")
        n = self.spec.base_n
        out = np.zeros((self.n_bar,) + y.shape[1:], self.dtype)
        for b in self.blocks:
            yq = y[self._row_off[b.q]:self._row_off[b.q + 1]]
            z = np.zeros((n,) + y.shape[1:], self.dtype)
            z[b.rows] = yq
            w = self._backward(z, b)
            out[self._col_off[b.p]:self._col_off[b.p + 1]] += b.scale * w[b.cols]
        return out

    def lipschitz_bound(self) -> float:
        # ||A||^2 <= sum_q ||A_q||^2 and ||A_q A_q^H|| <= sum_p R_qp
        return float(sum(b.scale ** 2 for b in self.blocks))


def build_operator(spec: EnsembleSpec, seed: SeedLike = None) -> MeasurementOperator:
    """Realize ``spec``; every block draws its own permutations (and unitary) from ``seed``."""
    rng = make_rng(seed)
    if spec.kind is Kind.GAUSSIAN_IID:
        g = standard_normal(rng, (spec.m_bar, spec.n_bar), spec.field) / math.sqrt(spec.n_bar)
        return DenseOperator(g, spec)
    n = spec.base_n
    if spec.base_transform is BaseTransform.DFT and n & (n - 1):
        logger.info("DFT base size %d is not a power of two; FFT falls back to a slower kernel", n)
    blocks = []
    gains = spec.gain_array
    for q, m_q in enumerate(spec.m_sizes):
        for p, n_p in enumerate(spec.n_sizes):
            # draws happen for zero-gain blocks too, so realizations do not
            # depend on which blocks are switched off
            rows = rng.permutation(n)[:m_q]
            cols = rng.permutation(n)[:n_p]
            unitary = haar_unitary(n, rng, spec.field) if spec.base_transform is BaseTransform.HAAR else None
            if gains[q, p] == 0:
                continue
            blocks.append(_Block(q, p, math.sqrt(gains[q, p]), rows, cols, unitary))
    return StructuredOperator(spec, blocks)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def operator_norm_sq(
    op: MeasurementOperator, tol: float = 1e-10, max_iters: int = 10_000, seed: SeedLike = 0
) -> NormEstimate:
    """Largest eigenvalue of ``A^H A`` by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relatively.
    On hitting ``max_iters`` the best estimate is returned with
    ``converged=False``.
    """
    rng = make_rng(seed)
    v = standard_normal(rng, op.n_bar, op.field)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iters + 1):
        w = op.adjoint(op.apply(v))
        new = float(np.real(np.vdot(v, w)))
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return NormEstimate(0.0, it, True)
        v = w / nrm
        if abs(new - est) <= tol * abs(new):
            return NormEstimate(new, it, True)
        est = new
    return NormEstimate(est, max_iters, False)
