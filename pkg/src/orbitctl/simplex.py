"""Dense two-phase tableau simplex with Bland's rule, for the tiny LPs of the ample check.

Problems are in standard form: maximize c.x subject to A x = b, x >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    value: float | None = None


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run(T: np.ndarray, basis: list[int], allowed: int, tol: float, max_iter: int) -> str:
    """Maximize the objective held in the last row (w = T[-1,-1] - sum_j T[-1,j] x_j)."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        entering = next((j for j in range(allowed) if T[-1, j] < -tol), None)
        if entering is None:
            return OPTIMAL
        col = T[:m, entering]
        best, leave = None, None
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best - tol or (abs(ratio - best) <= tol and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return UNBOUNDED
        _pivot(T, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit reached")


def solve(c, A, b, tol: float = 1e-11, max_iter: int = 5000) -> LPResult:
    """Maximize c.x subject to A x = b, x >= 0."""
    A = np.atleast_2d(np.asarray(A, dtype=float)).copy()
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    ftol = tol * scale

    # phase 1: artificials a >= 0 with A x + a = b, maximize -sum(a)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(T, basis, n + m, ftol, max_iter)
    # rounding in the phase-1 objective grows with the size of the basic solution
    if T[-1, -1] < -ftol * max(1.0, m, float(np.max(np.abs(T[:m, -1]), initial=0.0))):
        return LPResult(INFEASIBLE)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > ftol), None)
            if j is None:
                continue
            _pivot(T, i, j)
            basis[i] = j
        keep.append(i)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # phase 2
    T[-1, :n] = -c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status = _run(T, basis, n, ftol, max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = max(T[i, -1], 0.0)
    return LPResult(OPTIMAL, x, float(c @ x))


def nonnegative_solution(M, b, bound: float | None = None, tol: float = 1e-11) -> np.ndarray | None:
    """The lam >= 0 with M lam = b of least coefficient sum, or None if there is none.

    With ``bound`` given, solutions whose coefficient sum exceeds it count as absent.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    res = solve(-np.ones(M.shape[1]), M, b, tol)
    if res.status != OPTIMAL:
        return None
    if bound is not None and -res.value > bound:
        return None
    return res.x
