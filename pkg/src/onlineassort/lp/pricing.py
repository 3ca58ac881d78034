"""Column pricing: maximize sum_{i in S} rr(i) phi(i, S | v) over a family.

For cardinality and partition families the fractional objective is solved
exactly by bisection on its value z: some S reaches value >= z iff
``max_S sum_{i in S} (rr(i) - z) v(i) >= z``, and that inner maximum is
attained greedily (largest positive terms, subject to the family's caps).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..mnl import DEFAULT_ENUM_CAP, EMPTY, AssortmentFamily, EnumerationTooLarge, family_matrix

BISECTION_STEPS = 60


class UnsupportedFamily(ValueError):
    pass


@lru_cache(maxsize=64)
def cached_family_matrix(family: AssortmentFamily, cap: int = DEFAULT_ENUM_CAP):
    members, X = family_matrix(family, cap)
    X.setflags(write=False)
    return members, X


def fractional_value(v: np.ndarray, rr: np.ndarray, S) -> float:
    if not S:
        return 0.0
    idx = np.asarray(S) - 1
    w = v[idx]
    return float(rr[idx] @ w / (1.0 + w.sum()))


def greedy_select(scores: np.ndarray, family: AssortmentFamily) -> tuple:
    """Best set for a modular objective: positive scores, top-B overall or
    top-b per block; ties go to the lowest index."""
    if family.kind == "cardinality":
        groups = [np.arange(family.N)]
        cap = family.B
    elif family.kind == "partition":
        size = family.N // family.p
        groups = [np.arange(j * size, (j + 1) * size) for j in range(family.p)]
        cap = family.b
    else:
        raise UnsupportedFamily(family.kind)
    chosen = []
    for g in groups:
        s = scores[g]
        order = np.argsort(-s, kind="stable")[:cap]
        chosen.extend(int(g[j]) + 1 for j in order if s[j] > 0)
    return tuple(sorted(chosen))


def price_bisection(v, rr, family: AssortmentFamily):
    v = np.asarray(v, dtype=float)
    rr = np.asarray(rr, dtype=float)
    top = float(rr.max())
    if top <= 0:
        return EMPTY, 0.0
    lo, hi = 0.0, top
    for _ in range(BISECTION_STEPS):
        z = 0.5 * (lo + hi)
        scores = (rr - z) * v
        S = greedy_select(scores, family)
        if S and scores[np.asarray(S) - 1].sum() >= z:
            lo = z
        else:
            hi = z
    S = greedy_select((rr - lo) * v, family)
    val = fractional_value(v, rr, S)
    if val <= 0:
        return EMPTY, 0.0
    return S, val


def price_enumerate(v, rr, family: AssortmentFamily, cap: int = DEFAULT_ENUM_CAP, extra=None):
    """Brute-force maximization; ``extra`` is an optional modular bonus per item."""
    members, X = cached_family_matrix(family, cap)
    v = np.asarray(v, dtype=float)
    W = X * v
    vals = (W @ np.asarray(rr, dtype=float)) / (1.0 + W.sum(axis=1))
    if extra is not None:
        vals = vals + X @ np.asarray(extra, dtype=float)
    j = int(np.argmax(vals))  # lowest lexicographic position among ties
    return members[j], float(vals[j])


def price_column(v, reduced_revenues, family: AssortmentFamily, tol: float = 1e-9, cap: int = DEFAULT_ENUM_CAP):
    """Return ``(S*, value)`` maximizing the reduced revenue over ``family``.

    ``tol`` is accepted for interface symmetry; bisection already resolves
    the value far below any master-problem tolerance.
    """
    if family.kind in ("cardinality", "partition"):
        return price_bisection(v, reduced_revenues, family)
    try:
        return price_enumerate(v, reduced_revenues, family, cap)
    except EnumerationTooLarge as exc:
        raise UnsupportedFamily(f"no pricing oracle for {family.kind} family") from exc
