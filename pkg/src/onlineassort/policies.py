"""Period-by-period assortment policies.

Every policy follows the same protocol: ``next_assortment(t, remaining, rng)``
is called at the start of period ``t`` (1-based), then ``observe(t, i)``
with the purchased product (0 for no purchase).  Policies keep their own
inventory ledger and abort (offer the empty set forever) as soon as any
resource is exhausted.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import (
    ConvergenceError,
    SalesHistory,
    SingleItemCounts,
    confidence_radius_learning,
    mle_full,
    mle_single_item,
    ucb_constants,
)
from .lp import AssortmentDistribution, LPResult, SolverOptions, UcbLpSpec, solve_lp, solve_ucb_lp
from .mnl import EMPTY, UtilityVector, enumerate_family, family_contains

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


class OmegaTooLarge(ConfigurationError):
    def __init__(self, omega: float):
        super().__init__(f"UCB policy needs omega < 1, got omega = {omega:.6g}")
        self.omega = omega


class Policy:
    """Shared inventory ledger and abort rule."""

    name = "policy"

    def __init__(self, view):
        self.view = view
        self.remaining = [int(x) for x in view.capacities]
        a = np.asarray(view.a).reshape(-1, view.N)
        self._uses = [tuple(np.flatnonzero(a[:, i])) for i in range(view.N)]
        self.aborted = len(self.remaining) > 0 and min(self.remaining) <= 0
        self.abort_period = None
        self.lp_results: list[LPResult] = []

    def next_assortment(self, t: int, remaining, rng) -> tuple:
        raise NotImplementedError

    def observe(self, t: int, purchased: int) -> None:
        if purchased:
            for k in self._uses[purchased - 1]:
                self.remaining[k] -= 1
        if not self.aborted and self.remaining and min(self.remaining) <= 0:
            self.aborted = True
            self.abort_period = t

    @property
    def cg_iterations(self) -> list[int]:
        return [res.cg_iterations for res in self.lp_results]


class OnlineTau(Policy):
    """Explore-then-commit: ``tau/N`` singleton offers per product, then
    sample assortments from the LP solution built on the estimates."""

    name = "online_tau"

    def __init__(self, view, tau: int, delta: float = 0.1, solver_opts: SolverOptions | None = None):
        super().__init__(view)
        if not 1 <= tau <= view.T:
            raise ConfigurationError(f"tau={tau} must lie in [1, T={view.T}]")
        self.requested_tau = int(tau)
        self.per_product = int(tau) // view.N
        if self.per_product < 1:
            raise ConfigurationError(f"tau={tau} is below N={view.N}; no learning possible")
        self.tau = self.per_product * view.N
        self.delta = delta
        self.solver_opts = solver_opts or SolverOptions()
        self.purchases = np.zeros(view.N, dtype=np.int64)
        self.v_hat: UtilityVector | None = None
        self.y_hat: AssortmentDistribution | None = None
        self.lp_result: LPResult | None = None
        self._current = EMPTY

    @property
    def phase(self) -> str:
        if self.aborted:
            return "Aborted"
        return "Earning" if self.y_hat is not None else "Learning"

    def counts(self) -> list[SingleItemCounts]:
        return [SingleItemCounts(i + 1, self.per_product, int(self.purchases[i])) for i in range(self.view.N)]

    def next_assortment(self, t, remaining, rng):
        if self.aborted:
            self._current = EMPTY
        elif t <= self.tau:
            self._current = ((t - 1) // self.per_product + 1,)
        else:
            if self.y_hat is None:
                self._fit()
            self._current = self.y_hat.sample(rng.random())
        return self._current

    def observe(self, t, purchased):
        if t <= self.tau and purchased:
            self.purchases[purchased - 1] += 1
        super().observe(t, purchased)

    def _fit(self):
        R = self.view.R
        est = [mle_single_item(c, R) for c in self.counts()]
        self.v_hat = UtilityVector(est, R)
        self.lp_result = solve_lp(self.view, self.v_hat, self.solver_opts)
        self.lp_results.append(self.lp_result)
        self.y_hat = self.lp_result.distribution


class UCBPolicy(Policy):
    """Optimistic policy: per-period MLE on the whole history, then sample
    from the solution of the widened LP.

    ``psi_scale`` shrinks the confidence constants (a desk-scale hook);
    ``eps_fn`` / ``omega`` override the radii and the capacity shrinkage
    outright.  ``stride`` > 1 refits only every ``stride`` periods.
    """

    name = "ucb"

    def __init__(
        self,
        view,
        delta: float = 0.1,
        psi_scale: float = 1.0,
        stride: int = 1,
        eps_fn=None,
        omega: float | None = None,
        solver_opts: SolverOptions | None = None,
    ):
        super().__init__(view)
        c_min = float(np.min(view.c)) if view.K else 1.0
        self.constants = ucb_constants(
            view.T, view.N, view.K, view.family.max_size, view.R, c_min, delta, psi_scale=psi_scale
        )
        self.omega = self.constants.omega if omega is None else float(omega)
        if self.omega >= 1:
            raise OmegaTooLarge(self.omega)
        self.eps_fn = eps_fn if eps_fn is not None else self.constants.eps
        self.stride = max(1, int(stride))
        self.solver_opts = solver_opts or SolverOptions()
        self.warm_start = [warm_start_assortment(view.family, i) for i in range(1, view.N + 1)]
        self.history = SalesHistory(view.N)
        self.v_t: UtilityVector | None = None
        self.y_t: AssortmentDistribution | None = None
        self.mle_failures = 0
        self._current = EMPTY
        self._last_fit = None

    @property
    def phase(self) -> str:
        if self.aborted:
            return "Aborted"
        return "Main" if self.y_t is not None else "WarmStart"

    def next_assortment(self, t, remaining, rng):
        if self.aborted:
            self._current = EMPTY
        elif t <= self.view.N:
            self._current = self.warm_start[t - 1]
        else:
            if self._last_fit is None or t - self._last_fit >= self.stride:
                self._refit()
                self._last_fit = t
            self._current = self.y_t.sample(rng.random())
        return self._current

    def observe(self, t, purchased):
        if not self.aborted:
            self.history.append(self._current, purchased, keep_record=False)
        super().observe(t, purchased)

    def _refit(self):
        R = self.view.R
        theta0 = None if self.v_t is None else np.log(self.v_t.values)
        try:
            self.v_t = mle_full(self.history, R, theta0=theta0)
        except ConvergenceError as exc:
            self.mle_failures += 1
            log.warning("MLE did not converge (%s); keeping the previous plan", exc)
            if self.y_t is not None:
                return
            self.v_t = exc.best
        spec = UcbLpSpec(self.v_t, self.history.exposure, self.omega, self.eps_fn)
        warm = [S for S, _ in self.y_t.support] if self.y_t is not None else ()
        res = solve_ucb_lp(self.view, spec, self.solver_opts, init_columns=warm)
        self.lp_results.append(res)
        self.y_t = res.distribution


class StaticOracle(Policy):
    """Clairvoyant baseline: samples from the LP solution under the true utilities."""

    name = "static_oracle"

    def __init__(self, instance, solver_opts: SolverOptions | None = None, lp_result: LPResult | None = None):
        super().__init__(instance.public_view())
        self.lp_result = lp_result or solve_lp(instance, instance.v_star, solver_opts)
        self.lp_results.append(self.lp_result)
        self.y_star = self.lp_result.distribution

    def next_assortment(self, t, remaining, rng):
        if self.aborted:
            return EMPTY
        return self.y_star.sample(rng.random())


class UniformRandom(Policy):
    """Offers a uniformly random member of the family each period."""

    name = "uniform_random"

    def __init__(self, view, cap: int = 10**6):
        super().__init__(view)
        self.members = list(enumerate_family(view.family, cap))

    def next_assortment(self, t, remaining, rng):
        if self.aborted:
            return EMPTY
        return self.members[int(rng.integers(len(self.members)))]


def warm_start_assortment(family, i: int) -> tuple:
    if family_contains(family, (i,)):
        return (i,)
    for S in enumerate_family(family):
        if i in S:
            return S
    raise ConfigurationError(f"no assortment in the family contains product {i}")


def make_online_tau(view, tau: int, delta: float = 0.1, **kw) -> OnlineTau:
    return OnlineTau(view, tau, delta, **kw)


def make_ucb(view, delta: float = 0.1, **kw) -> UCBPolicy:
    return UCBPolicy(view, delta, **kw)


def make_static_oracle(instance, **kw) -> StaticOracle:
    return StaticOracle(instance, **kw)


def tau_for_horizon(T: int, rule="T^{2/3}") -> int:
    """Learning length from a rule: ``"T^{2/3}"`` or an explicit integer."""
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    if isinstance(rule, str) and rule.replace(" ", "") in ("T^{2/3}", "T^(2/3)", "T**(2/3)"):
        # guard against 1000 ** (2/3) == 99.99999999999997
        return max(1, int(math.floor(T ** (2.0 / 3.0) + 1e-9)))
    raise ConfigurationError(f"unknown tau rule {rule!r}")


@dataclass
class Assumption1Report:
    tau: int
    eps_tau: float
    cond_i: list = field(default_factory=list)  # (lhs, rhs, ok) per resource
    cond_ii: dict = field(default_factory=dict)  # reading -> [(lhs, rhs, ok)]

    @property
    def ok_i(self) -> bool:
        return all(ok for *_, ok in self.cond_i)

    def ok_ii(self, reading: str = "C=B") -> bool:
        return all(ok for *_, ok in self.cond_ii[reading])

    def lines(self) -> list[str]:
        out = [f"tau={self.tau} eps(tau)={self.eps_tau:.6g}"]
        for k, (lhs, rhs, ok) in enumerate(self.cond_i, 1):
            out.append(f"(i)  k={k}: {lhs:.6g} <= {rhs:.6g} {'pass' if ok else 'FAIL'} slack={rhs - lhs:.6g}")
        for reading, rows in self.cond_ii.items():
            for k, (lhs, rhs, ok) in enumerate(rows, 1):
                out.append(
                    f"(ii) {reading} k={k}: {lhs:.6g} <= {rhs:.6g} {'pass' if ok else 'FAIL'} slack={rhs - lhs:.6g}"
                )
        return out


def check_assumption_1(view, tau: int, delta: float) -> Assumption1Report:
    """Evaluate both learning-phase conditions per resource.

    Condition (ii) carries an undetermined constant; it is reported for
    both the ``C=B`` and ``C=1`` readings.  Advisory only.
    """
    N, K = view.N, view.K
    tau_adj = max(N, (int(tau) // N) * N)
    eps = confidence_radius_learning(tau_adj, N, view.R, delta)
    rep = Assumption1Report(tau=tau_adj, eps_tau=eps)
    caps = view.T * np.asarray(view.c, float)
    if K:
        lhs_i = tau_adj * math.sqrt(math.log(4 * N * K / delta))
        rep.cond_i = [(lhs_i, float(cap), lhs_i <= cap) for cap in caps]
    B = view.family.max_size
    for reading, C in (("C=B", B), ("C=1", 1)):
        rep.cond_ii[reading] = [(C * eps, 0.5 * float(ck), C * eps <= 0.5 * ck) for ck in view.c]
    return rep
