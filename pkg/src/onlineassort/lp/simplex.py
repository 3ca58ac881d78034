"""Dense revised simplex for the restricted master problem.

Solves::

    max  c^T y
    s.t. A y <= rhs          (K rows, duals lam >= 0)
         1^T y = 1           (dual mu)
         y >= 0

by adding slacks and starting from the basis {slacks, empty column}, which
requires ``rhs >= 0`` and an all-zero column.  The basis has K+1 members, so
the returned vertex has at most K+1 positive weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
RC_TOL = 1e-11


class DegeneratePivotError(ArithmeticError):
    pass


@dataclass
class SimplexResult:
    weights: np.ndarray  # y, one per column
    slacks: np.ndarray
    lam: np.ndarray  # resource duals
    mu: float  # convexity-row dual
    basis: list
    objective: float
    iterations: int
    reduced_costs: np.ndarray  # of the y columns at the final basis

    @property
    def duals(self) -> np.ndarray:
        return np.append(self.lam, self.mu)


def simplex_solve(obj, cons, rhs, max_iter: int = 10_000, zero_col: int | None = None) -> SimplexResult:
    """Solve the restricted master LP.

    ``obj`` has one entry per column, ``cons`` is K x n, ``rhs`` has K entries.
    Dantzig pricing is used until a run of degenerate pivots appears, after
    which Bland's rule takes over to rule out cycling.
    """
    c = np.asarray(obj, dtype=float).reshape(-1)
    n = c.size
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    K = rhs.size
    A = np.asarray(cons, dtype=float).reshape(K, n)
    if np.any(rhs < 0):
        raise ValueError("right-hand sides must be nonnegative")
    if zero_col is None:
        zeros = np.flatnonzero((c == 0) & np.all(A == 0, axis=0))
        if zeros.size == 0:
            raise ValueError("the all-zero (empty assortment) column must be present")
        zero_col = int(zeros[0])

    m = K + 1
    # Full constraint matrix: [A I; 1 0]; variables 0..n-1 are y, n..n+K-1 slacks.
    M = np.zeros((m, n + K))
    M[:K, :n] = A
    M[:K, n:] = np.eye(K)
    M[K, :n] = 1.0
    cost = np.concatenate([c, np.zeros(K)])
    b = np.append(rhs, 1.0)

    basis = [n + k for k in range(K)] + [zero_col]
    degenerate_run = 0
    use_bland = False
    it = 0
    while True:
        # the basis is at most (K+1) x (K+1); one inverse serves all three solves
        Binv = np.linalg.inv(M[:, basis])
        xB = Binv @ b
        pi = cost[basis] @ Binv
        d = cost - pi @ M
        d[basis] = 0.0
        scale = max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        candidates = np.flatnonzero(d > RC_TOL * scale)
        if candidates.size == 0:
            break
        if it >= max_iter:
            raise DegeneratePivotError(f"simplex exceeded {max_iter} pivots")
        if use_bland:
            enter = int(candidates[0])
        else:
            # argmax returns the lowest index among ties
            enter = int(candidates[np.argmax(d[candidates])])
        u = Binv @ M[:, enter]
        rows = np.flatnonzero(u > PIVOT_TOL)
        if rows.size == 0:
            raise DegeneratePivotError(
                f"no admissible pivot for column {enter}: max direction entry "
                f"{float(np.max(u)) if u.size else 0.0:.3e}, reduced cost {d[enter]:.3e}"
            )
        ratios = np.maximum(xB[rows], 0.0) / u[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-14]
        leave_row = int(min(ties, key=lambda r: basis[r]))
        if best <= 1e-14:
            degenerate_run += 1
            if degenerate_run > 2 * m:
                use_bland = True
        else:
            degenerate_run = 0
        basis[leave_row] = enter
        it += 1

    x = np.zeros(n + K)
    x[basis] = np.maximum(xB, 0.0)
    y = x[:n]
    total = y.sum()
    if total > 0:
        y = y / total
    lam = pi[:K].copy()
    return SimplexResult(
        weights=y,
        slacks=x[n:],
        lam=lam,
        mu=float(pi[K]),
        basis=list(basis),
        objective=float(c @ y),
        iterations=it,
        reduced_costs=d[:n],
    )
