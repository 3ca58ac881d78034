"""Sales-horizon environment, instance generation and per-run metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .lp import AssortmentDistribution, LPResult, SolverOptions, solve_lp
from .mnl import AssortmentFamily, UtilityVector, family_contains

SUPPORT_TOL = 1e-9


class ContractViolation(RuntimeError):
    """A policy offered something the environment cannot accept."""


@dataclass
class RunLog:
    seed: int
    T: int
    offers: list  # S_t per period
    purchases: np.ndarray  # I_t per period (0 = no purchase)
    revenues: np.ndarray
    capacities_after: np.ndarray  # T x K
    t_stop: int
    total_revenue: float
    final_capacities: np.ndarray

    def rows(self):
        for t in range(self.T):
            yield t + 1, self.offers[t], int(self.purchases[t]), float(self.revenues[t]), self.capacities_after[t]

    def to_text(self) -> str:
        """Line-oriented dump, one period per line; byte-stable for equal runs."""
        out = [f"seed={self.seed} T={self.T} t_stop={self.t_stop} revenue={self.total_revenue!r}"]
        for t, S, i, rev, caps in self.rows():
            items = ",".join(map(str, S))
            out.append(f"{t}\t{{{items}}}\t{i}\t{rev!r}\t{' '.join(map(str, caps))}")
        return "\n".join(out) + "\n"


def split_seed(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (policy, environment) random streams for one episode."""
    pol, env = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(pol), np.random.default_rng(env)


def run_episode(instance: Instance, policy, seed: int, check_family: bool = True,
                stop_after: int | None = None) -> RunLog:
    """Simulate ``T`` periods: offer, purchase under ``v_star``, earn, deplete.

    ``stop_after`` truncates the episode (the log then covers fewer periods).
    """
    T, K, N = instance.T, instance.K, instance.N
    pol_rng, env_rng = split_seed(seed)
    uniforms = env_rng.random(T)
    if stop_after is not None:
        T = min(T, int(stop_after))
    v = instance.v_star.values.tolist()
    r = instance.r.tolist()
    uses = [tuple(np.flatnonzero(instance.a[:, i])) for i in range(N)]
    caps = [int(x) for x in instance.capacities]
    family = instance.family

    offers = []
    purchases = np.zeros(T, dtype=np.int64)
    revenues = np.zeros(T)
    cap_log = np.zeros((T, K), dtype=np.int64)
    t_stop = T
    total = 0.0
    for t in range(1, T + 1):
        S = tuple(policy.next_assortment(t, tuple(caps), pol_rng))
        if check_family and S and not family_contains(family, S):
            raise ContractViolation(f"period {t}: {S} is not in the assortment family")
        # same inverse-CDF order as mnl.sample_purchase: S ascending, then 0
        i = 0
        if S:
            denom = 1.0
            for j in S:
                denom += v[j - 1]
            u = uniforms[t - 1] * denom
            acc = 0.0
            for j in S:
                acc += v[j - 1]
                if u < acc:
                    i = j
                    break
        if i:
            for k in uses[i - 1]:
                if caps[k] <= 0:
                    raise ContractViolation(f"period {t}: purchase of {i} exceeds resource {k + 1}")
                caps[k] -= 1
            revenues[t - 1] = r[i - 1]
            total += r[i - 1]
        purchases[t - 1] = i
        offers.append(S)
        cap_log[t - 1] = caps
        policy.observe(t, i)
        if t_stop == T and K and min(caps) == 0 and t < T:
            t_stop = t
    return RunLog(
        seed=seed,
        T=T,
        offers=offers,
        purchases=purchases,
        revenues=revenues,
        capacities_after=cap_log,
        t_stop=t_stop,
        total_revenue=total,
        final_capacities=np.array(caps, dtype=np.int64),
    )


def audit_run(instance: Instance, log: RunLog) -> list[str]:
    """Return every ledger inconsistency found in a run log (empty if clean)."""
    problems = []
    caps = instance.capacities.astype(np.int64)
    used = np.zeros(instance.K, dtype=np.int64)
    for t, S, i, rev, after in log.rows():
        if i and i not in S:
            problems.append(f"t={t}: purchase {i} not offered")
        if i:
            used += instance.a[:, i - 1].astype(np.int64)
        if not np.array_equal(after, caps - used):
            problems.append(f"t={t}: capacity ledger mismatch")
        if np.any(after < 0):
            problems.append(f"t={t}: negative capacity")
        expected_rev = instance.r[i - 1] if i else 0.0
        if rev != expected_rev:
            problems.append(f"t={t}: revenue mismatch")
        if t > log.t_stop and (S or i):
            problems.append(f"t={t}: activity after abort at {log.t_stop}")
    if np.any(used > caps):
        problems.append("total consumption exceeds capacity")
    return problems


@dataclass(frozen=True)
class ClassTuple:
    family: dict  # {"kind": "cardinality", "B": ...} or {"kind": "partition", "p": ..., "b": ...}
    N: int
    K: int
    R: float
    name: str = ""

    def make_family(self) -> AssortmentFamily:
        return AssortmentFamily.from_dict(dict(self.family), self.N)

    def label(self) -> str:
        if self.name:
            return self.name
        f = self.family
        fam = f"S1({f['B']})" if f["kind"] == "cardinality" else f"S2({f['p']},{f['b']})"
        return f"({fam},{self.N},{self.K},{self.R:g})"


# Class tuples used in the experiments (cardinality: 1-3, partition matroid: 4-6).
PRESET_CLASSES = {
    "gamma1": ClassTuple({"kind": "cardinality", "B": 6}, 10, 5, 3, "gamma1"),
    "gamma2": ClassTuple({"kind": "cardinality", "B": 9}, 15, 6, 5, "gamma2"),
    "gamma3": ClassTuple({"kind": "cardinality", "B": 15}, 25, 8, 7, "gamma3"),
    "gamma4": ClassTuple({"kind": "partition", "p": 2, "b": 3}, 10, 5, 3, "gamma4"),
    "gamma5": ClassTuple({"kind": "partition", "p": 3, "b": 3}, 15, 6, 5, "gamma5"),
    "gamma6": ClassTuple({"kind": "partition", "p": 5, "b": 3}, 25, 8, 7, "gamma6"),
}


@dataclass(frozen=True)
class GeneratorSettings:
    c_low: float = 0.25
    c_high: float = 0.75
    consumption_prob: float = 0.5


def generate_instance(cls: ClassTuple, T: int, seed: int, settings: GeneratorSettings | None = None) -> Instance:
    """Random instance: uniform revenues, Bernoulli consumption, uniform
    capacity rates snapped to multiples of 1/T, log-uniform utilities."""
    settings = settings or GeneratorSettings()
    rng = np.random.default_rng(seed)
    N, K, R = cls.N, cls.K, float(cls.R)
    r = rng.uniform(0.0, 1.0, N)
    a = (rng.random((K, N)) < settings.consumption_prob).astype(float)
    c_raw = rng.uniform(settings.c_low, settings.c_high, K)
    v = np.exp(rng.uniform(-math.log(R), math.log(R), N))
    caps = np.clip(np.round(T * c_raw), 1, T)
    return Instance(r=r, a=a, c=caps / T, T=T, family=cls.make_family(), v_star=UtilityVector(v, R))


def compute_benchmark(instance: Instance, opts: SolverOptions | None = None) -> tuple[float, LPResult]:
    """``T * Opt(LP(v_star))`` and the LP solution it comes from."""
    res = solve_lp(instance, instance.v_star, opts)
    return instance.T * res.objective, res


def support_match(y_hat: AssortmentDistribution, y_star: AssortmentDistribution) -> bool:
    return y_hat.sets(SUPPORT_TOL) == y_star.sets(SUPPORT_TOL)


@dataclass
class RunMetrics:
    revenue: float
    benchmark: float
    t_stop: int
    support_match: bool | None = None
    cg_iter_max: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def regret(self) -> float:
        return self.benchmark - self.revenue

    @property
    def ratio(self) -> float:
        return self.revenue / self.benchmark if self.benchmark > 0 else float("nan")
