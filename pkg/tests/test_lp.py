
import numpy as np
import pytest

from onlineassort.instance import Instance
from onlineassort.lp import (
    OPTIMAL,
    SolverOptions,
    UcbLpSpec,
    lp_text,
    price_column,
    simplex_solve,
    solve_lp,
    solve_ucb_lp,
)
from onlineassort.mnl import AssortmentFamily, UtilityVector, enumerate_family, expected_revenue
from onlineassort.verify import enumeration_lp, random_lp_instance


def small_instance(N=4, B=2, K=1, seed=0, T=1000, c=None):
    rng = np.random.default_rng(seed)
    return Instance(
        r=rng.random(N),
        a=(rng.random((K, N)) < 0.5).astype(float),
        c=np.full(K, 0.3) if c is None else c,
        T=T,
        family=AssortmentFamily.cardinality(N, B),
        v_star=UtilityVector(np.exp(rng.uniform(-1, 1, N)), 3.0),
    )


def test_simplex_single_column():
    res = simplex_solve(np.array([0.0]), np.zeros((1, 1)), np.array([0.5]), zero_col=0)
    assert res.weights.tolist() == [1.0]
    assert res.objective == 0.0


def test_simplex_hand_lp():
    # max y1 + 0.6 y2  s.t. 0.8 y1 + 0.2 y2 <= 0.4, y0 + y1 + y2 = 1
    # optimum y1 = 1/3, y2 = 2/3, value 11/15, duals lam = 2/3, mu = 7/15
    res = simplex_solve(np.array([0.0, 1.0, 0.6]), np.array([[0.0, 0.8, 0.2]]), np.array([0.4]), zero_col=0)
    assert res.objective == pytest.approx(11 / 15, abs=1e-14)
    assert res.weights == pytest.approx([0.0, 1 / 3, 2 / 3], abs=1e-14)
    assert res.lam == pytest.approx([2 / 3], abs=1e-14)
    assert res.mu == pytest.approx(7 / 15, abs=1e-14)


def test_simplex_strong_duality():
    rng = np.random.default_rng(3)
    for _ in range(50):
        K, n = int(rng.integers(1, 4)), int(rng.integers(2, 12))
        obj = np.concatenate([[0.0], rng.random(n)])
        cons = np.hstack([np.zeros((K, 1)), rng.random((K, n))])
        rhs = rng.uniform(0.05, 0.8, K)
        res = simplex_solve(obj, cons, rhs, zero_col=0)
        assert obj @ res.weights == pytest.approx(rhs @ res.lam + res.mu, abs=1e-8)
        assert np.all(cons @ res.weights <= rhs + 1e-10)
        assert res.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_solve_lp_without_resources_is_point_mass():
    inst = small_instance(N=5, B=2, K=0, seed=2)
    res = solve_lp(inst, inst.v_star)
    best = max(expected_revenue(inst.v_star, S, inst.r) for S in enumerate_family(inst.family))
    assert res.objective == pytest.approx(best, abs=1e-12)
    assert len(res.distribution) == 1


def test_loose_capacities_reduce_to_unconstrained():
    inst = small_instance(N=5, B=3, K=2, seed=4, c=np.ones(2))
    free = Instance(r=inst.r, a=np.zeros((0, 5)), c=[], T=inst.T, family=inst.family, v_star=inst.v_star)
    assert solve_lp(inst, inst.v_star).objective == pytest.approx(solve_lp(free, free.v_star).objective, abs=1e-12)


def test_solve_lp_matches_enumeration_oracle():
    inst = small_instance(N=4, B=2, K=1, seed=11)
    res = solve_lp(inst, inst.v_star)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(enumeration_lp(inst, inst.v_star.values), abs=1e-7)
    rng = np.random.default_rng(8)
    for _ in range(25):
        inst = random_lp_instance(rng, cap_n=7)
        res = solve_lp(inst, inst.v_star)
        assert abs(res.objective - enumeration_lp(inst, inst.v_star.values)) <= 1e-7
        assert len(res.distribution) <= inst.K + 1
        assert res.distribution.total() == pytest.approx(1.0)


def test_pricing_examples():
    fam = AssortmentFamily.cardinality(3, 2)
    S, val = price_column(np.ones(3), np.array([-0.1, -0.5, 0.0]), fam)
    assert S == () and val == 0.0
    S, val = price_column(np.ones(1), np.array([1.0]), AssortmentFamily.cardinality(1, 1))
    assert S == (1,) and val == pytest.approx(0.5)


@pytest.mark.parametrize("fam", [AssortmentFamily.cardinality(6, 3), AssortmentFamily.partition(6, 3, 1),
                                 AssortmentFamily.explicit(6, [(1, 2), (3, 4, 5), (6,)])])
def test_pricing_brute_force(fam):
    rng = np.random.default_rng(1)
    for _ in range(40):
        v = np.exp(rng.uniform(-1, 1, 6))
        rr = rng.uniform(-1, 1, 6)
        _, val = price_column(v, rr, fam)
        brute = max(sum(rr[i - 1] * v[i - 1] for i in S) / (1 + sum(v[i - 1] for i in S))
                    for S in enumerate_family(fam))
        assert val == pytest.approx(brute, abs=1e-9)


def test_ucb_lp_without_widening_equals_lp():
    inst = small_instance(N=5, B=2, K=2, seed=6)
    spec = UcbLpSpec(inst.v_star, np.full(5, 10), 0.0, lambda n: np.zeros_like(n, dtype=float))
    assert solve_ucb_lp(inst, spec).objective == pytest.approx(solve_lp(inst, inst.v_star).objective, abs=1e-7)


def test_ucb_lp_matches_enumeration_and_dominates():
    rng = np.random.default_rng(12)
    for _ in range(10):
        inst = random_lp_instance(rng, cap_n=6)
        N = inst.N
        n = rng.integers(1, 50, N)
        eps = rng.uniform(0, 0.05, N)
        spec = UcbLpSpec(inst.v_star, n, 0.0, lambda _n, e=eps: e)
        res = solve_ucb_lp(inst, spec)
        # enumeration oracle over explicit widened columns
        members = list(enumerate_family(inst.family))
        v = inst.v_star.values
        objs, cons = [], []
        for S in members:
            idx = np.array(S, dtype=int) - 1
            p = v[idx] / (1 + v[idx].sum()) if S else np.zeros(0)
            bonus = eps[idx].sum() if S else 0.0
            objs.append(float(inst.r[idx] @ p) + bonus)
            cons.append((inst.a[:, idx] @ p - bonus) if S else np.zeros(inst.K))
        from scipy.optimize import linprog
        kw = {"A_ub": np.array(cons).T, "b_ub": inst.c} if inst.K else {}
        ref = linprog(-np.array(objs), A_eq=np.ones((1, len(members))), b_eq=[1], bounds=(0, None),
                      method="highs-ds", **kw)
        assert res.objective == pytest.approx(-ref.fun, abs=1e-7)
        assert res.objective >= solve_lp(inst, inst.v_star).objective - 1e-9


def test_lp_text_lists_columns():
    inst = small_instance(N=4, B=2, K=1, seed=11)
    text = lp_text(solve_lp(inst, inst.v_star))
    assert text.startswith("\\ restricted_master\n\\ y0 = {}")
    assert "Maximize" in text and "conv:" in text and "np." not in text
