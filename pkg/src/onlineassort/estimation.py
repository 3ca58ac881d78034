"""Maximum-likelihood estimation of MNL utilities and confidence radii.

The full likelihood is handled in log-space, ``theta = log v``, where it is
convex.  Sales histories are aggregated by distinct assortment, so one
likelihood evaluation costs O(#distinct assortments x N) regardless of how
many periods have been observed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mnl import UtilityVector, as_array, make_assortment


class InsufficientData(ValueError):
    """Some product was never offered, so its utility is not identified."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, best: UtilityVector, stationarity: float):
        super().__init__(msg)
        self.best = best
        self.stationarity = stationarity


@dataclass(frozen=True)
class SingleItemCounts:
    i: int
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or not 0 <= self.n <= self.m:
            raise ValueError(f"need m >= 1 and 0 <= n <= m, got m={self.m}, n={self.n}")


def neg_log_likelihood_single(v: float, counts: SingleItemCounts) -> float:
    """Negative log-likelihood of ``n`` purchases out of ``m`` offers of ``{i}``."""
    if v <= 0:
        raise ValueError(f"utility must be positive, got {v}")
    return counts.n * math.log1p(1.0 / v) + (counts.m - counts.n) * math.log1p(v)


def mle_single_item(counts: SingleItemCounts, R: float) -> float:
    """Closed-form minimizer of :func:`neg_log_likelihood_single` on ``[1/R, R]``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    n, m = counts.n, counts.m
    if n == m:
        return float(R)
    if n == 0:
        return 1.0 / R
    return float(min(max(n / (m - n), 1.0 / R), R))


@dataclass
class SalesHistory:
    """Observed (assortment, purchase) pairs, aggregated by assortment."""

    N: int
    records: list = field(default_factory=list)

    def __post_init__(self):
        self._agg: dict[tuple, list] = {}
        self._exposure = np.zeros(self.N, dtype=np.int64)
        self._arrays = None
        old, self.records = self.records, []
        for S, i in old:
            self.append(S, i)

    def append(self, S: Sequence[int], i: int, keep_record: bool = True) -> None:
        S = make_assortment(S, self.N)
        if i != 0 and i not in S:
            raise ValueError(f"purchase {i} is not in the offered assortment {S}")
        if keep_record:
            self.records.append((S, int(i)))
        entry = self._agg.get(S)
        if entry is None:
            entry = self._agg[S] = [0, np.zeros(self.N, dtype=np.int64)]
        entry[0] += 1
        if i:
            entry[1][i - 1] += 1
        if S:
            self._exposure[np.asarray(S) - 1] += 1
        self._arrays = None

    def __len__(self):
        return int(sum(e[0] for e in self._agg.values()))

    @property
    def exposure(self) -> np.ndarray:
        """n(i): number of periods in which product i was offered."""
        return self._exposure.copy()

    def arrays(self):
        """(incidence X [D x N], offer counts m [D], purchase counts P [D x N])."""
        if self._arrays is None:
            keys = [S for S in self._agg if S]
            D = len(keys)
            X = np.zeros((D, self.N))
            m = np.zeros(D)
            P = np.zeros((D, self.N))
            for row, S in enumerate(keys):
                X[row, np.asarray(S) - 1] = 1.0
                m[row] = self._agg[S][0]
                P[row] = self._agg[S][1]
            self._arrays = (X, m, P)
        return self._arrays


def _nll_theta(theta: np.ndarray, hist: SalesHistory) -> float:
    X, m, P = hist.arrays()
    if X.shape[0] == 0:
        return 0.0
    w = np.exp(theta)
    return float(m @ np.log1p(X @ w) - (P @ theta).sum())


def neg_log_likelihood_full(v, history: SalesHistory) -> float:
    return _nll_theta(np.log(as_array(v)), history)


def likelihood_gradient(theta, history: SalesHistory) -> np.ndarray:
    """Gradient of the full negative log-likelihood with respect to ``log v``."""
    theta = np.asarray(theta, dtype=float)
    X, m, P = history.arrays()
    if X.shape[0] == 0:
        return np.zeros(history.N)
    w = np.exp(theta)
    probs = X * w / (1.0 + X @ w)[:, None]
    return m @ probs - P.sum(axis=0)


def likelihood_hessian(theta, history: SalesHistory) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    X, m, P = history.arrays()
    if X.shape[0] == 0:
        return np.zeros((history.N, history.N))
    w = np.exp(theta)
    probs = X * w / (1.0 + X @ w)[:, None]
    return np.diag(m @ probs) - probs.T @ (probs * m[:, None])


def mle_full(
    history: SalesHistory,
    R: float,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    theta0=None,
) -> UtilityVector:
    """Box-constrained MLE of the utilities by projected Newton in log-space.

    Stationarity is measured as ``max |theta - clip(theta - grad)|``.  Raises
    :class:`InsufficientData` if a product was never offered and
    :class:`ConvergenceError` (carrying the best iterate) if ``max_iter`` is hit.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if np.any(history.exposure < 1):
        missing = [i + 1 for i in np.flatnonzero(history.exposure < 1)]
        raise InsufficientData(f"products never offered: {missing}")
    hi = math.log(R)
    lo = -hi
    theta = np.zeros(history.N) if theta0 is None else np.clip(np.asarray(theta0, float), lo, hi)
    f = _nll_theta(theta, history)

    def stationarity(th, g):
        return float(np.max(np.abs(th - np.clip(th - g, lo, hi))))

    for _ in range(max_iter):
        g = likelihood_gradient(theta, history)
        s = stationarity(theta, g)
        if s <= tol:
            return UtilityVector(np.exp(theta), R)
        # Coordinates within s of a bound, with the gradient pushing outward,
        # are held fixed (epsilon-active set); Newton step on the rest.
        eps_b = min(1e-3, s)
        pinned = ((theta <= lo + eps_b) & (g > 0)) | ((theta >= hi - eps_b) & (g < 0))
        free = ~pinned
        d = np.zeros_like(theta)
        if free.any():
            H = likelihood_hessian(theta, history)[np.ix_(free, free)]
            try:
                d[free] = -np.linalg.solve(H, g[free])
            except np.linalg.LinAlgError:
                d[free] = -g[free]
            if g[free] @ d[free] >= 0:
                d[free] = -g[free]
        d[pinned] = -g[pinned]
        cand, fc = _projected_search(theta, f, g, d, lo, hi, history)
        if cand is None:
            cand, fc = _projected_search(theta, f, g, -g, lo, hi, history)
        if cand is None or np.array_equal(cand, theta):
            # No representable decrease left: accept if the remaining
            # first-order gain is at roundoff level.
            gain = abs(g @ (np.clip(theta - g, lo, hi) - theta))
            if gain <= 1e3 * np.finfo(float).eps * max(1.0, abs(f)):
                return UtilityVector(np.exp(theta), R)
            raise ConvergenceError(
                f"line search stalled with stationarity {s:.3e}",
                UtilityVector(np.exp(theta), R),
                s,
            )
        theta, f = cand, fc
    g = likelihood_gradient(theta, history)
    s = stationarity(theta, g)
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations (stationarity {s:.3e})",
        UtilityVector(np.exp(theta), R),
        s,
    )


def _projected_search(theta, f, g, d, lo, hi, history, max_halvings=60):
    """Armijo backtracking along the projection arc; ``(None, None)`` on failure."""
    step = 1.0
    for _ in range(max_halvings):
        cand = np.clip(theta + step * d, lo, hi)
        fc = _nll_theta(cand, history)
        if fc <= f + 1e-4 * (g @ (cand - theta)):
            return cand, fc
        step *= 0.5
    return None, None


def confidence_radius_learning(tau: int, N: int, R: float, delta: float) -> float:
    """Radius of the log-utility confidence band after a learning phase of length ``tau``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if tau < N:
        raise ValueError(f"tau={tau} must be at least N={N}")
    return 4.0 * R * math.sqrt((N / tau) * math.log(4.0 * N / delta))


@dataclass(frozen=True)
class ConfidenceConstants:
    delta: float
    Psi: float
    omega: float
    N: int
    eps_tau: float | None = None

    @property
    def omega_ok(self) -> bool:
        return self.omega < 1.0

    def eps(self, n) -> float | np.ndarray:
        """Per-product confidence radius after ``n`` exposures (vectorized)."""
        n_arr = np.asarray(n, dtype=float)
        if np.any(n_arr < 1):
            raise ValueError("confidence radius needs n >= 1")
        out = (math.sqrt(self.N) + 1.0) * self.Psi / np.sqrt(n_arr)
        return float(out) if out.ndim == 0 else out


def ucb_constants(
    T: int,
    N: int,
    K: int,
    B: int,
    R: float,
    c_min: float,
    delta: float,
    psi_scale: float = 1.0,
    tau: int | None = None,
) -> ConfidenceConstants:
    """Constants of the UCB policy.

    ``psi_scale`` multiplies the confidence width (and hence ``omega``); it
    exists so the policy can be exercised at horizons where the nominal
    constants are vacuous.  Leave it at 1 for the nominal policy.
    """
    if min(T, N, R, delta) <= 0 or K < 0 or B < 0:
        raise ValueError("arguments must be positive")
    if not 0 < c_min <= 1:
        raise ValueError("c_min must lie in (0, 1]")
    psi = psi_scale * R * (1.0 + B * R) ** 2 * math.sqrt(6.0 * math.log(2.0 * N * T * (K + 1) / delta))
    omega = 11.0 * psi * N / c_min * math.sqrt((B / T) * math.log(4.0 * (K + 1) / delta))
    eps_tau = confidence_radius_learning(tau, N, R, delta) if tau is not None else None
    return ConfidenceConstants(delta=delta, Psi=psi, omega=omega, N=N, eps_tau=eps_tau)

