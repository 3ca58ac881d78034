"""On-demand verification suites.

Each suite draws random cases, checks one property against an independent
oracle (brute-force enumeration, an external LP solver, root finding, finite
differences, Monte Carlo) and returns a :class:`SuiteResult`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, linprog

from .estimation import (
    SalesHistory,
    SingleItemCounts,
    confidence_radius_learning,
    likelihood_gradient,
    mle_single_item,
)
from .instance import Instance
from .lp import OPTIMAL, SolverOptions, price_column, price_enumerate, solve_lp
from .mnl import (
    DEFAULT_ENUM_CAP,
    AssortmentFamily,
    UtilityVector,
    choice_prob,
    enumerate_family,
    family_contains,
    family_matrix,
)
from .policies import OnlineTau, StaticOracle, UCBPolicy, UniformRandom, check_assumption_1
from .simulator import audit_run, run_episode


@dataclass
class SuiteResult:
    name: str
    cases: int
    violations: int
    worst: float
    tolerance: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" {self.detail}" if self.detail else ""
        return (f"{self.name}: {status} cases={self.cases} violations={self.violations} "
                f"worst={self.worst:.3e} tol={self.tolerance:.1e}{extra}")


def random_utilities(rng, N, R):
    return np.exp(rng.uniform(-math.log(R), math.log(R), N))


def random_subset(rng, N, max_size=None):
    k = int(rng.integers(0, (max_size if max_size is not None else N) + 1))
    return tuple(sorted(int(i) + 1 for i in rng.choice(N, size=k, replace=False)))


def random_family(rng, N, max_b=3):
    divisors = [p for p in (2, 3, 4, 5) if N % p == 0 and N // p >= 1]
    if divisors and rng.random() < 0.5:
        p = int(rng.choice(divisors))
        return AssortmentFamily.partition(N, p, int(rng.integers(1, min(max_b, N // p) + 1)))
    return AssortmentFamily.cardinality(N, int(rng.integers(1, min(max_b, N) + 1)))


def suite_normalization(seed=0, cases=10_000, cap_n=10, R=5.0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, 0
    for _ in range(cases):
        N = int(rng.integers(1, cap_n + 1))
        v = random_utilities(rng, N, R)
        S = random_subset(rng, N)
        probs = [choice_prob(v, S, i) for i in (0, *S)]
        err = abs(sum(probs) - 1.0)
        out_of_range = any(p < 0 or p > 1 for p in probs)
        worst = max(worst, err)
        bad += (err > 1e-12) or out_of_range
    return SuiteResult("normalization", cases, bad, worst, 1e-12)


def suite_lipschitz(seed=0, cases=10_000, cap_n=10, R=5.0) -> SuiteResult:
    """sum_S b(i) (phi(i,S|v) - phi(i,S|v')) <= sum_S |log v(i)/v'(i)|."""
    rng = np.random.default_rng(seed)
    worst, bad = -math.inf, 0
    for _ in range(cases):
        N = int(rng.integers(1, cap_n + 1))
        v, w = random_utilities(rng, N, R), random_utilities(rng, N, R)
        b = rng.random(N)
        S = random_subset(rng, N)
        lhs = sum(b[i - 1] * (choice_prob(v, S, i) - choice_prob(w, S, i)) for i in S)
        rhs = sum(abs(math.log(v[i - 1] / w[i - 1])) for i in S)
        worst = max(worst, lhs - rhs)
        bad += lhs - rhs > 1e-12
    return SuiteResult("lipschitz", cases, bad, worst, 1e-12, "worst = max(lhs - rhs)")


def _single_item_oracle(n, m, R):
    # Stationary point of n log(1 + 1/v) + (m - n) log(1 + v), by root finding.
    def deriv(v):
        return -n / (v * (v + 1.0)) + (m - n) / (1.0 + v)

    lo, hi = 1.0 / R, float(R)
    if deriv(lo) >= 0:
        return lo
    if deriv(hi) <= 0:
        return hi
    return brentq(deriv, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def nll_by_terms(v, records) -> float:
    return sum(-math.log(choice_prob(v, S, i)) for S, i in records)


def suite_mle(seed=0, m_max=50, fd_cases=100, R_values=(3.0, 100.0)) -> SuiteResult:
    """Closed-form single-item MLE vs numeric minimizer; gradient vs finite differences."""
    worst_mle, bad, cases = 0.0, 0, 0
    for R in R_values:
        for m in range(1, m_max + 1):
            for n in range(m + 1):
                got = mle_single_item(SingleItemCounts(1, m, n), R)
                err = abs(got - _single_item_oracle(n, m, R))
                worst_mle = max(worst_mle, err)
                bad += err > 1e-8
                cases += 1
    grad_res = suite_gradient(seed, fd_cases)
    return SuiteResult(
        "mle", cases + grad_res.cases, bad + grad_res.violations, worst_mle, 1e-8,
        f"gradient_worst={grad_res.worst:.3e} (tol 1e-5)",
    )


def random_history(rng, N, n_records, R=3.0):
    v = random_utilities(rng, N, R)
    records = []
    for _ in range(n_records):
        S = random_subset(rng, N)
        if not S:
            S = (int(rng.integers(1, N + 1)),)
        p = [choice_prob(v, S, i) for i in S]
        u, acc, pick = rng.random(), 0.0, 0
        for i, pi in zip(S, p):
            acc += pi
            if u < acc:
                pick = i
                break
        records.append((S, pick))
    return records


def suite_gradient(seed=0, cases=100, step=1e-6, tol=1e-5) -> SuiteResult:
    rng = np.random.default_rng(seed + 1)
    worst, bad = 0.0, 0
    for _ in range(cases):
        N = int(rng.integers(1, 7))
        records = random_history(rng, N, int(rng.integers(1, 31)))
        hist = SalesHistory(N, records)
        theta = rng.uniform(-1.5, 1.5, N)
        g = likelihood_gradient(theta, hist)
        fd = np.zeros(N)
        for j in range(N):
            e = np.zeros(N)
            e[j] = step
            fd[j] = (nll_by_terms(np.exp(theta + e), records) - nll_by_terms(np.exp(theta - e), records)) / (2 * step)
        err = float(np.max(np.abs(fd - g)))
        worst = max(worst, err)
        bad += err > tol
    return SuiteResult("gradient", cases, bad, worst, tol)


def random_lp_instance(rng, cap_n=8, max_b=3, max_k=3, T=1000):
    N = int(rng.integers(2, cap_n + 1))
    K = int(rng.integers(0, max_k + 1))
    fam = random_family(rng, N, max_b)
    return Instance(
        r=rng.random(N),
        a=(rng.random((K, N)) < 0.5).astype(float),
        c=np.round(rng.uniform(0.05, 0.8, K) * T) / T,
        T=T,
        family=fam,
        v_star=UtilityVector(random_utilities(rng, N, 3.0), 3.0),
    )


def enumeration_lp(instance, v, cap=DEFAULT_ENUM_CAP):
    """Optimal value of the LP over every enumerated assortment (HiGHS dual simplex)."""
    members, X = family_matrix(instance.family, cap)
    W = X * np.asarray(v)
    P = W / (1.0 + W.sum(axis=1))[:, None]
    obj = P @ instance.r
    kw = {}
    if instance.K:
        kw = {"A_ub": (P @ instance.a.T).T, "b_ub": instance.c}
    res = linprog(-obj, A_eq=np.ones((1, len(members))), b_eq=[1.0], bounds=(0, None),
                  method="highs-ds", **kw)
    if res.status != 0:
        raise RuntimeError(f"enumeration LP failed: {res.message}")
    return -res.fun


def suite_lp_oracle(seed=0, cases=50, cap_n=8, cap_family=DEFAULT_ENUM_CAP) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, 0
    notes = []
    for case in range(cases):
        inst = random_lp_instance(rng, cap_n)
        v = inst.v_star.values
        res = solve_lp(inst, v, SolverOptions(enum_cap=cap_family))
        gap = abs(res.objective - enumeration_lp(inst, v, cap_family))
        worst = max(worst, gap)
        problems = []
        if gap > 1e-7:
            problems.append(f"gap {gap:.2e}")
        if res.status != OPTIMAL:
            problems.append(res.status)
        if len(res.distribution) > inst.K + 1:
            problems.append(f"support {len(res.distribution)} > K+1")
        if not all(family_contains(inst.family, S) for S, _ in res.distribution.support):
            problems.append("non-member in support")
        if abs(res.distribution.total() - 1) > 1e-9:
            problems.append("weights do not sum to 1")
        # Certificate: no assortment prices out positively at the final duals.
        lam, mu = res.duals[:-1], res.duals[-1]
        _, best = price_enumerate(v, inst.r - lam @ inst.a, inst.family, cap_family)
        if best - mu > 1e-7:
            problems.append(f"positive reduced cost {best - mu:.2e}")
        if problems:
            bad += 1
            notes.append(f"case {case}: {', '.join(problems)}")
    return SuiteResult("lp-oracle", cases, bad, worst, 1e-7, "; ".join(notes[:3]))


def suite_pricing_oracle(seed=0, cases=200, cap_n=10, R=3.0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, 0
    for _ in range(cases):
        N = int(rng.integers(1, cap_n + 1))
        fam = random_family(rng, N, max_b=4)
        v = random_utilities(rng, N, R)
        rr = rng.uniform(-1.0, 1.0, N)
        S, val = price_column(v, rr, fam)
        brute = max(sum(rr[i - 1] * choice_prob(v, T, i) for i in T) for T in enumerate_family(fam))
        own = sum(rr[i - 1] * choice_prob(v, S, i) for i in S)
        err = max(abs(val - brute), abs(own - val))
        worst = max(worst, err)
        bad += err > 1e-9 or not family_contains(fam, S)
    return SuiteResult("pricing-oracle", cases, bad, worst, 1e-9)


def feasibility_instances(rng, count=4, T=400):
    out = []
    for _ in range(count):
        N = int(rng.integers(2, 5))
        K = int(rng.integers(1, 3))
        caps = rng.integers(1, T // 3, K)
        out.append(Instance(
            r=rng.random(N),
            a=(rng.random((K, N)) < 0.6).astype(float),
            c=caps / T,
            T=T,
            family=AssortmentFamily.cardinality(N, 2),
            v_star=UtilityVector(random_utilities(rng, N, 2.0), 2.0),
        ))
    return out


def suite_feasibility(seed=0, runs=5) -> SuiteResult:
    """Audit every run log of every policy for capacity violations."""
    rng = np.random.default_rng(seed)
    cases, bad = 0, 0
    for inst in feasibility_instances(rng):
        view = inst.public_view()
        makers = [
            lambda: OnlineTau(view, max(inst.N, int(inst.T ** (2 / 3)))),
            lambda: UCBPolicy(view, psi_scale=1e-6),
            lambda: StaticOracle(inst),
            lambda: UniformRandom(view),
        ]
        for make in makers:
            for j in range(runs):
                log = run_episode(inst, make(), seed * 1000 + j)
                cases += 1
                bad += bool(audit_run(inst, log))
    return SuiteResult("feasibility", cases, bad, float(bad), 0.0)


def coverage_instance(delta=0.1, R=1.2, c=0.5):
    """Smallest two-product instance whose learning length satisfies both
    learning-phase conditions (under either reading of the constant)."""
    N, B = 2, 1
    fam = AssortmentFamily.cardinality(N, B)
    tau_min = N * math.log(4 * N / delta) * (8 * R * B / c) ** 2
    tau = N * math.ceil(tau_min / N)
    T = 2 * math.ceil(tau * math.sqrt(math.log(4 * N / delta)) / c)
    return Instance(r=[0.6, 0.9], a=[[1, 1]], c=[c], T=T, family=fam,
                    v_star=UtilityVector([0.9, 1.1], R)), tau


def coverage_threshold(runs, delta):
    return runs * (1 - delta) - 3 * math.sqrt(runs * delta * (1 - delta))


def suite_coverage(seed=0, runs=200, delta=0.1) -> SuiteResult:
    """Fraction of learning phases whose estimates fall in the log-utility band."""
    inst, tau = coverage_instance(delta)
    view = inst.public_view()
    rep = check_assumption_1(view, tau, delta)
    assert rep.ok_i and rep.ok_ii("C=B") and rep.ok_ii("C=1"), rep.lines()
    eps = confidence_radius_learning(tau, inst.N, inst.R, delta)
    hits = 0
    worst = 0.0
    for j in range(runs):
        pol = OnlineTau(view, tau, delta)
        run_episode(inst, pol, seed * 100_000 + j, stop_after=tau)
        est = np.array([mle_single_item(c, inst.R) for c in pol.counts()])
        dev = float(np.max(np.abs(np.log(est / inst.v_star.values))))
        worst = max(worst, dev)
        hits += dev <= eps
    need = coverage_threshold(runs, delta)
    return SuiteResult(
        "coverage", runs, int(hits < need), worst, eps,
        f"hits={hits} required>={need:.1f} tau={tau} T={inst.T}",
    )


SUITES = {
    "normalization": suite_normalization,
    "lipschitz": suite_lipschitz,
    "mle": suite_mle,
    "lp-oracle": suite_lp_oracle,
    "pricing-oracle": suite_pricing_oracle,
    "feasibility": suite_feasibility,
    "coverage": suite_coverage,
}


def run_suite(name: str, seed: int = 0, cap_n: int | None = None, cap_family_size: int | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kw = {}
    if cap_n is not None and name in ("normalization", "lipschitz", "lp-oracle", "pricing-oracle"):
        kw["cap_n"] = cap_n
    if cap_family_size is not None and name == "lp-oracle":
        kw["cap_family"] = cap_family_size
    return SUITES[name](seed=seed, **kw)
