"""Column generation for the fluid LP and its optimistic (UCB) variant."""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..mnl import DEFAULT_ENUM_CAP, EMPTY, UtilityVector, as_array, family_contains
from .pricing import fractional_value, greedy_select, price_bisection, price_column, price_enumerate
from .simplex import simplex_solve

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
ITERATION_CAPPED = "IterationCapped"
HEURISTIC = "Heuristic"

SUPPORT_TOL = 1e-9


def _lex_key(S):
    return (len(S) > 0, S)


class AssortmentDistribution:
    """Finite distribution over assortments, stored sorted lexicographically."""

    def __init__(self, support):
        items = [(tuple(S), float(w)) for S, w in support if w > 0]
        items.sort(key=lambda sw: _lex_key(sw[0]))
        self.support = items
        self._cum = np.cumsum([w for _, w in items]) if items else np.zeros(0)

    @classmethod
    def point(cls, S=EMPTY) -> "AssortmentDistribution":
        return cls([(S, 1.0)])

    def total(self) -> float:
        return float(self._cum[-1]) if self.support else 0.0

    def sets(self, threshold: float = SUPPORT_TOL) -> set:
        return {S for S, w in self.support if w > threshold}

    def sample(self, u: float):
        """Inverse-CDF draw using a uniform ``u`` in [0, 1)."""
        if not self.support:
            return EMPTY
        j = bisect.bisect_right(self._cum, u * self._cum[-1])
        return self.support[min(j, len(self.support) - 1)][0]

    def __len__(self):
        return len(self.support)

    def __repr__(self):
        body = ", ".join(f"{set(S) or '{}'}: {w:.4g}" for S, w in self.support)
        return f"AssortmentDistribution({body})"


@dataclass
class SolverOptions:
    tol: float = 1e-7
    max_iter: int = 500
    enum_cap: int = DEFAULT_ENUM_CAP
    pricing: str = "auto"  # "auto" | "enumerate"


@dataclass
class LPResult:
    distribution: AssortmentDistribution
    objective: float
    duals: np.ndarray  # lam(1..K), then the convexity-row dual
    cg_iterations: int
    status: str
    degenerate: bool = False
    columns: list = field(default_factory=list, repr=False)
    obj_coeffs: np.ndarray = field(default=None, repr=False)
    cons_coeffs: np.ndarray = field(default=None, repr=False)
    rhs: np.ndarray = field(default=None, repr=False)


@dataclass
class UcbLpSpec:
    v_t: UtilityVector
    n: np.ndarray
    omega: float
    eps: Callable

    def __post_init__(self):
        self.n = np.asarray(self.n)
        if np.any(self.n < 1):
            raise ValueError("every product needs at least one exposure")
        if not 0 <= self.omega < 1:
            raise ValueError(f"omega must lie in [0, 1), got {self.omega}")


def column_coeffs(v: np.ndarray, S, r: np.ndarray, a: np.ndarray):
    """Expected revenue and per-resource expected consumption of ``S``."""
    if not S:
        return 0.0, np.zeros(a.shape[0])
    idx = np.asarray(S) - 1
    w = v[idx]
    p = w / (1.0 + w.sum())
    return float(r[idx] @ p), a[:, idx] @ p


def _column_generation(view, v, rhs, coeffs, price, opts: SolverOptions, certified: bool, init=()):
    r = np.asarray(view.r, float)
    a = np.asarray(view.a, float).reshape(-1, r.size)
    K = a.shape[0]
    columns = [EMPTY]
    index = {EMPTY: 0}
    objs = [0.0]
    cons = [np.zeros(K)]
    for S in init:
        S = tuple(S)
        if S not in index:
            index[S] = len(columns)
            columns.append(S)
            o, c = coeffs(S)
            objs.append(o)
            cons.append(c)
    status = ITERATION_CAPPED
    iters = 0
    degenerate = False
    res = None
    while iters < opts.max_iter:
        res = simplex_solve(np.array(objs), np.array(cons).reshape(len(cons), K).T, rhs, zero_col=0)
        iters += 1
        S, value = price(res.lam, res.mu)
        reduced = value - res.mu
        if reduced <= opts.tol or S in index:
            status = OPTIMAL if certified else HEURISTIC
            basic = set(res.basis)
            degenerate = bool(
                np.any((np.abs(res.reduced_costs) <= SUPPORT_TOL) & ~np.isin(np.arange(len(columns)), list(basic)))
            ) or (S not in index and reduced >= -SUPPORT_TOL and S != EMPTY)
            break
        index[S] = len(columns)
        columns.append(S)
        o, c = coeffs(S)
        objs.append(o)
        cons.append(c)
    if status == ITERATION_CAPPED:
        log.warning("column generation hit the iteration cap (%d)", opts.max_iter)
        res = simplex_solve(np.array(objs), np.array(cons).reshape(len(cons), K).T, rhs, zero_col=0)
    dist = AssortmentDistribution(
        [(columns[j], res.weights[j]) for j in range(len(columns)) if res.weights[j] > 0]
    )
    return LPResult(
        distribution=dist,
        objective=res.objective,
        duals=res.duals,
        cg_iterations=iters,
        status=status,
        degenerate=degenerate,
        columns=columns,
        obj_coeffs=np.array(objs),
        cons_coeffs=np.array(cons).reshape(len(cons), K).T,
        rhs=np.asarray(rhs, float),
    )


def solve_lp(view, v, opts: SolverOptions | None = None) -> LPResult:
    """Solve the fluid LP for utilities ``v`` by column generation.

    ``view`` needs ``r``, ``a``, ``c`` and ``family`` (an :class:`Instance`
    or its public view).  The result is a vertex of the LP, so its support
    has at most K+1 assortments.
    """
    opts = opts or SolverOptions()
    v = as_array(v)
    r = np.asarray(view.r, float)
    a = np.asarray(view.a, float).reshape(-1, r.size)
    family = view.family

    def coeffs(S):
        return column_coeffs(v, S, r, a)

    def price(lam, mu):
        rr = r - lam @ a
        if opts.pricing == "enumerate":
            return price_enumerate(v, rr, family, opts.enum_cap)
        return price_column(v, rr, family, cap=opts.enum_cap)

    return _column_generation(view, v, np.asarray(view.c, float), coeffs, price, opts, certified=True)


def solve_ucb_lp(view, spec: UcbLpSpec, opts: SolverOptions | None = None, init_columns=()) -> LPResult:
    """Solve the optimistic LP: revenues inflated and consumptions deflated by
    the per-product radii, capacities shrunk to ``(1 - omega) c``.

    ``init_columns`` seeds the restricted master (e.g. with the previous
    period's support); the optimum does not depend on it.

    Pricing is exact (enumeration) when the family is under ``opts.enum_cap``;
    otherwise a local-search heuristic is used and the status says so.
    """
    opts = opts or SolverOptions()
    v = as_array(spec.v_t)
    r = np.asarray(view.r, float)
    a = np.asarray(view.a, float).reshape(-1, r.size)
    family = view.family
    e = np.asarray(spec.eps(spec.n), dtype=float).reshape(-1) * np.ones(r.size)
    rhs = (1.0 - spec.omega) * np.asarray(view.c, float)

    def coeffs(S):
        o, c = column_coeffs(v, S, r, a)
        bonus = float(e[np.asarray(S) - 1].sum()) if S else 0.0
        return o + bonus, c - bonus

    certified = family.size() <= opts.enum_cap

    def price(lam, mu):
        rr = r - lam @ a
        extra = e * (1.0 + lam.sum())
        if certified:
            return price_enumerate(v, rr, family, opts.enum_cap, extra=extra)
        return _local_search_price(v, rr, extra, family)

    return _column_generation(view, v, rhs, coeffs, price, opts, certified=certified, init=init_columns)


def _local_search_price(v, rr, extra, family):
    def value(S):
        return fractional_value(v, rr, S) + (float(extra[np.asarray(S) - 1].sum()) if S else 0.0)

    starts = [price_bisection(v, rr, family)[0], greedy_select(extra + rr * v / (1 + v), family)]
    best_S, best_val = EMPTY, 0.0
    for S in starts:
        cur, cur_val = S, value(S)
        improved = True
        while improved:
            improved = False
            for cand in _neighbours(cur, family.N):
                if family_contains(family, cand):
                    val = value(cand)
                    if val > cur_val + 1e-12:
                        cur, cur_val, improved = cand, val, True
                        break
        if cur_val > best_val:
            best_S, best_val = cur, cur_val
    return best_S, best_val


def _neighbours(S, N):
    s = set(S)
    for i in range(1, N + 1):
        if i in s:
            yield tuple(sorted(s - {i}))
        else:
            yield tuple(sorted(s | {i}))
            for j in S:
                yield tuple(sorted((s - {j}) | {i}))


def lp_text(result: LPResult, name: str = "restricted_master") -> str:
    """Restricted master problem in CPLEX LP format.

    Variable ``y<j>`` is the weight of ``result.columns[j]``; the mapping is
    listed in comment lines at the top.  Resource rows are ``res<k>`` (k from
    1), the convexity row is ``conv``.  Variables are nonnegative by default.
    """
    lines = [f"\\ {name}"]
    for j, S in enumerate(result.columns):
        lines.append(f"\\ y{j} = {{{', '.join(map(str, S))}}}")
    lines.append("Maximize")
    terms = " + ".join(f"{float(result.obj_coeffs[j])!r} y{j}" for j in range(len(result.columns)))
    lines.append(f" obj: {terms}")
    lines.append("Subject To")
    for k in range(result.cons_coeffs.shape[0]):
        row = " + ".join(f"{float(result.cons_coeffs[k, j])!r} y{j}" for j in range(len(result.columns)))
        lines.append(f" res{k + 1}: {row} <= {float(result.rhs[k])!r}")
    lines.append(" conv: " + " + ".join(f"y{j}" for j in range(len(result.columns))) + " = 1")
    lines.append("End")
    return "\n".join(lines).replace("+ -", "- ") + "\n"
