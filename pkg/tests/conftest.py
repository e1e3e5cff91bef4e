from __future__ import annotations

import numpy as np
import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict; all lines are printed in the terminal summary."""

    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def coordinate_descent_lasso(A: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-15, max_sweeps: int = 200_000):
    """Exact cyclic coordinate minimization of ``(1/lam)||y - Ax||^2 + ||x||_1``.

    Each coordinate update is the closed-form scalar minimizer
    ``soft(a_i^H r_i, lam/2) / ||a_i||^2``; independent of proximal gradient.
    """
    n = A.shape[1]
    x = np.zeros(n, dtype=np.result_type(A, y))
    r = y.astype(x.dtype).copy()
    col_sq = np.sum(np.abs(A) ** 2, axis=0)
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(n):
            if col_sq[i] == 0:
                continue
            ri = r + A[:, i] * x[i]
            z = np.vdot(A[:, i], ri)
            mag = abs(z)
            new = 0.0 if mag <= lam / 2 else (mag - lam / 2) / mag * z / col_sq[i]
            if np.isrealobj(x):
                new = float(np.real(new))
            delta = max(delta, abs(new - x[i]))
            r = ri - A[:, i] * new
            x[i] = new
        if delta < tol:
            break
    return x
