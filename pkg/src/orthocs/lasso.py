"""LASSO reconstruction by proximal gradient.

The objective is ``(1/lam) * ||y - A x||^2 + ||x||_1`` where ``|x_i|`` is the
complex modulus.  With step ``s`` the iteration is

    x <- soft_threshold(x - s * (2/lam) * A^H (A x - y), s)

and the safe fixed step is ``s = lam / (2 L)`` with ``L >= ||A||^2``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import Field
from .operators import MeasurementOperator

logger = logging.getLogger(__name__)


class StepRule(str, enum.Enum):
    FIXED_SAFE = "fixed"
    BACKTRACKING = "backtracking"


def soft_threshold(x, thresh):
    """Shrink the modulus of every entry of ``x`` by ``thresh``, keeping the phase.

    Entries with ``|x| <= thresh`` (including exact zeros) map to 0.  For real
    input this is the usual ``sign(x) * max(|x| - thresh, 0)``.
    """
    if np.any(np.asarray(thresh) < 0):
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x)
    mag = np.abs(x)
    keep = mag > thresh
    scale = np.zeros(mag.shape)
    np.divide(mag - thresh, mag, out=scale, where=keep)
    out = x * scale
    return out[()] if out.ndim == 0 else out


def objective(y: np.ndarray, op: MeasurementOperator, x: np.ndarray, lam: float) -> float:
    r = y - op.apply(x)
    return float(np.vdot(r, r).real / lam + np.sum(np.abs(x)))


def empirical_mse(x0: np.ndarray, x_hat: np.ndarray) -> float:
    """Per-component squared error ``||x0 - x_hat||^2 / N_bar``."""
    x0, x_hat = np.asarray(x0), np.asarray(x_hat)
    if x0.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x0.shape} vs {x_hat.shape}")
    d = x0 - x_hat
    return float(np.vdot(d, d).real / d.size)


def kkt_violation(y: np.ndarray, op: MeasurementOperator, x: np.ndarray, lam: float, zero_tol: float = 0.0) -> float:
    """Largest violation of the subgradient optimality conditions at ``x``.

    With ``g = (2/lam) A^H (A x - y)``: on the support ``|g_i + x_i/|x_i|| = 0``,
    off the support ``|g_i| <= 1``.  Returns the worst excess over zero.
    """
    g = (2.0 / lam) * op.adjoint(op.apply(x) - y)
    mag = np.abs(x)
    on = mag > zero_tol
    worst = 0.0
    if np.any(on):
        worst = float(np.max(np.abs(g[on] + x[on] / mag[on])))
    if np.any(~on):
        worst = max(worst, float(np.max(np.abs(g[~on]))) - 1.0)
    return max(worst, 0.0)


@dataclass(frozen=True)
class LassoConfig:
    lam: float
    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_rule: StepRule = StepRule.FIXED_SAFE
    field: Field = Field.COMPLEX
    record_trace: bool = False
    # override for the Lipschitz constant ||A||^2; defaults to the operator's bound
    lipschitz: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        object.__setattr__(self, "step_rule", StepRule(self.step_rule))
        object.__setattr__(self, "field", Field(self.field))


@dataclass
class LassoResult:
    x_hat: np.ndarray
    iterations: int
    final_objective: float
    converged: bool
    objective_trace: list[float] | None = field(default=None, repr=False)


def solve(y: np.ndarray, op: MeasurementOperator, config: LassoConfig, x_init: np.ndarray | None = None) -> LassoResult:
    """Minimize the LASSO objective by (non-accelerated) proximal gradient.

    Stops once ``||x_{t+1} - x_t|| <= rel_tol * ||x_{t+1}||`` or after
    ``max_iters`` iterations; the latter is reported through
    ``converged=False`` rather than an exception.
    """
    if config.field is not op.field:
        raise ValueError(f"config field {config.field.value!r} does not match operator field {op.field.value!r}")
    y = np.asarray(y)
    if y.shape != (op.m_bar,):
        raise ValueError(f"y has shape {y.shape}, expected ({op.m_bar},)")
    lam = config.lam
    x = np.zeros(op.n_bar, op.dtype) if x_init is None else np.array(x_init, dtype=op.dtype)

    backtrack = config.step_rule is StepRule.BACKTRACKING
    if config.lipschitz is not None:
        lip = config.lipschitz
    else:
        lip = 1.0 if backtrack else op.lipschitz_bound()
    step = lam / (2.0 * lip)

    r = op.apply(x) - y
    smooth = np.vdot(r, r).real / lam
    trace = [smooth + np.sum(np.abs(x))] if config.record_trace else None
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        grad = (2.0 / lam) * op.adjoint(r)
        while True:
            x_new = soft_threshold(x - step * grad, step)
            r_new = op.apply(x_new) - y
            smooth_new = np.vdot(r_new, r_new).real / lam
            if not backtrack:
                break
            d = x_new - x
            bound = smooth + np.vdot(grad, d).real + np.vdot(d, d).real / (2 * step)
            if smooth_new <= bound * (1 + 1e-12):
                break
            step *= 0.5
        dx = np.linalg.norm(x_new - x)
        x, r, smooth = x_new, r_new, smooth_new
        if trace is not None:
            trace.append(smooth + np.sum(np.abs(x)))
        if dx <= config.rel_tol * np.linalg.norm(x):
            converged = True
            break

    if trace is not None and not backtrack and np.any(np.diff(trace) > 1e-12 * np.abs(trace[1:])):
        logger.warning("objective increased under the fixed safe step; Lipschitz bound %.6g may be too small", lip)
    return LassoResult(
        x_hat=x,
        iterations=it,
        final_objective=objective(y, op, x, lam),
        converged=converged,
        objective_trace=[float(v) for v in trace] if trace is not None else None,
    )
