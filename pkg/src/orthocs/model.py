"""Signal prior, noise model and problem-instance generation.

The linear system is ``y = A @ x0 + sigma0 * w`` with ``x0`` drawn i.i.d.
from a Bernoulli-Gaussian prior and ``w`` standard Gaussian noise of the
same scalar field as the operator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

if TYPE_CHECKING:
    from .operators import MeasurementOperator

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


class Field(str, enum.Enum):
    COMPLEX = "complex"
    REAL = "real"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.complex128 if self is Field.COMPLEX else np.float64)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a generator for ``seed``; generators are passed through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_rng(master_seed: int, trial: int, *stream: int) -> np.random.Generator:
    """Independent stream for Monte Carlo trial ``trial`` of a run seeded by ``master_seed``.

    Extra ``stream`` keys (e.g. a table-row index) select further independent
    families of trial streams under the same master seed.
    """
    key = tuple(int(s) for s in stream) + (int(trial),)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def standard_normal(rng: np.random.Generator, size, field: Field) -> np.ndarray:
    """Unit-variance Gaussian samples; complex ones are circularly symmetric."""
    if Field(field) is Field.COMPLEX:
        g = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
        return (g[0] + 1j * g[1]) / np.sqrt(2.0)
    return rng.standard_normal(size)


@dataclass(frozen=True)
class SignalPrior:
    """Bernoulli-Gaussian prior: zero w.p. ``1 - rho_x``, else unit-variance Gaussian."""

    rho_x: float
    field: Field = Field.COMPLEX

    def __post_init__(self):
        if not 0.0 <= self.rho_x <= 1.0:
            raise ValueError(f"rho_x must lie in [0, 1], got {self.rho_x}")
        object.__setattr__(self, "field", Field(self.field))


def sample_signal(prior: SignalPrior, n: int, seed: SeedLike = None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    support = rng.random(n) < prior.rho_x
    values = standard_normal(rng, n, prior.field)
    return np.where(support, values, 0).astype(prior.field.dtype)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    x0: np.ndarray
    y: np.ndarray
    sigma0_sq: float
    operator: "MeasurementOperator"


def generate_instance(
    op: "MeasurementOperator",
    prior: SignalPrior,
    sigma0_sq: float,
    seed: SeedLike = None,
    x0: np.ndarray | None = None,
) -> ProblemInstance:
    """Draw ``x0`` (unless given) and noise, and return the measured instance.

    The signal is sampled before the noise, so the same seed always yields
    the same pair.
    """
    if Field(prior.field) is not op.field:
        raise ValueError(f"prior field {prior.field.value!r} does not match operator field {op.field.value!r}")
    if sigma0_sq < 0:
        raise ValueError("sigma0_sq must be nonnegative")
    rng = make_rng(seed)
    if x0 is None:
        x0 = sample_signal(prior, op.n_bar, rng)
    elif x0.shape != (op.n_bar,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({op.n_bar},)")
    y = op.apply(x0)
    if sigma0_sq > 0:
        y = y + np.sqrt(sigma0_sq) * standard_normal(rng, op.m_bar, op.field)
    return ProblemInstance(x0=x0, y=y, sigma0_sq=float(sigma0_sq), operator=op)
