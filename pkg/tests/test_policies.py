import numpy as np
import pytest

from onlineassort.estimation import SingleItemCounts, mle_single_item
from onlineassort.instance import Instance
from onlineassort.lp import solve_lp
from onlineassort.mnl import AssortmentFamily, UtilityVector, enumerate_family, expected_revenue
from onlineassort.policies import (
    OmegaTooLarge,
    OnlineTau,
    UCBPolicy,
    check_assumption_1,
    make_online_tau,
    make_static_oracle,
    make_ucb,
    tau_for_horizon,
)
from onlineassort.simulator import PRESET_CLASSES, audit_run, generate_instance, run_episode


def tiny(N=2, K=1, T=200, c=0.5, B=None, seed=0, R=2.0):
    rng = np.random.default_rng(seed)
    return Instance(
        r=rng.uniform(0.2, 1.0, N),
        a=np.ones((K, N)),
        c=np.full(K, c),
        T=T,
        family=AssortmentFamily.cardinality(N, B or N),
        v_star=UtilityVector(np.exp(rng.uniform(-np.log(R), np.log(R), N)), R),
    )


def test_tau_rule_floor():
    assert tau_for_horizon(1000) == 100
    assert tau_for_horizon(250) == 39
    assert tau_for_horizon(8) == 4
    assert tau_for_horizon(17, 17) == 17


def test_online_tau_learning_schedule():
    inst = tiny(N=2)
    pol = make_online_tau(inst.public_view(), tau=2)
    log = run_episode(inst, pol, seed=1)
    assert log.offers[0] == (1,) and log.offers[1] == (2,)
    support = pol.y_hat.sets()
    assert all(S in support for S in log.offers[2:log.t_stop] if S)
    assert pol.tau == 2 and pol.phase in ("Earning", "Aborted")


def test_online_tau_rounds_tau_down():
    inst = tiny(N=3, T=300)
    pol = OnlineTau(inst.public_view(), tau=10)
    assert pol.tau == 9 and pol.per_product == 3


def test_online_tau_estimates_use_closed_form():
    inst = tiny(N=3, T=600, c=0.9)
    pol = OnlineTau(inst.public_view(), tau=60)
    run_episode(inst, pol, seed=5)
    expected = [mle_single_item(SingleItemCounts(i + 1, 20, int(pol.purchases[i])), inst.R) for i in range(3)]
    assert pol.v_hat.values == pytest.approx(expected, abs=0)
    assert pol.lp_result.objective == pytest.approx(solve_lp(inst, pol.v_hat).objective, abs=1e-12)


def test_abort_after_capacity_exhausted():
    inst = Instance(r=[1.0], a=[[1]], c=[1 / 50], T=50, family=AssortmentFamily.cardinality(1, 1),
                    v_star=UtilityVector([2.0], 2.0))
    makers = {
        "online_tau": lambda: OnlineTau(inst.public_view(), tau=5),
        "static_oracle": lambda: make_static_oracle(inst),
        "ucb": lambda: UCBPolicy(inst.public_view(), omega=0.0, eps_fn=lambda n: np.zeros_like(n, dtype=float)),
    }
    for name, make in makers.items():
        sold = 0
        for seed in range(40):
            pol = make()
            log = run_episode(inst, pol, seed=seed)
            assert not audit_run(inst, log)
            if not log.purchases.any():
                continue
            sold += 1
            first = int(np.flatnonzero(log.purchases)[0])
            assert all(S == () for S in log.offers[first + 1:])
            assert log.final_capacities.tolist() == [0]
            assert pol.abort_period == first + 1
        assert sold > 0, name


def test_ucb_warm_start_single_product():
    inst = tiny(N=1, T=30)
    pol = UCBPolicy(inst.public_view(), omega=0.0, eps_fn=lambda n: np.zeros_like(n, dtype=float))
    log = run_episode(inst, pol, seed=0)
    assert log.offers[0] == (1,)


def test_ucb_warm_start_needs_family_member():
    inst = Instance(r=[0.5, 0.5], a=[[1, 1]], c=[0.5], T=10,
                    family=AssortmentFamily.explicit(2, [(1, 2)]), v_star=UtilityVector([1, 1], 2))
    pol = UCBPolicy(inst.public_view(), omega=0.0, eps_fn=lambda n: np.zeros_like(n, dtype=float))
    assert pol.warm_start == [(1, 2), (1, 2)]


def test_ucb_without_widening_is_certainty_equivalent():
    inst = tiny(N=3, T=100, c=0.4)
    pol = UCBPolicy(inst.public_view(), omega=0.0, eps_fn=lambda n: np.zeros_like(n, dtype=float))
    run_episode(inst, pol, seed=4, stop_after=20)
    assert pol.lp_results
    assert pol.lp_results[-1].objective == pytest.approx(solve_lp(inst, pol.v_t).objective, abs=1e-7)


def test_ucb_rejects_large_omega():
    inst = tiny(N=3, T=500)
    with pytest.raises(OmegaTooLarge):
        make_ucb(inst.public_view(), 0.1)


def test_ucb_hard_constraint_audit():
    inst = tiny(N=3, K=1, T=500, c=0.2, seed=7)
    inst = Instance(r=inst.r, a=[[1, 0, 1]], c=inst.c, T=500, family=inst.family, v_star=inst.v_star)
    for seed in range(100):
        pol = UCBPolicy(inst.public_view(), psi_scale=1e-5)
        log = run_episode(inst, pol, seed)
        assert not audit_run(inst, log)
        used = sum(inst.a[0, i - 1] for i in log.purchases if i)
        assert used <= inst.capacities[0]


def test_static_oracle_without_resources():
    inst = Instance(r=[0.9, 0.6, 0.3], a=np.zeros((0, 3)), c=[], T=400,
                    family=AssortmentFamily.cardinality(3, 2), v_star=UtilityVector([0.5, 1.5, 2.0], 2.0))
    best = max(enumerate_family(inst.family), key=lambda S: expected_revenue(inst.v_star, S, inst.r))
    pol = make_static_oracle(inst)
    log = run_episode(inst, pol, seed=3)
    assert set(log.offers) == {best}


def test_static_oracle_per_period_revenue():
    inst = tiny(N=3, T=300, c=0.6, seed=3)
    opt = solve_lp(inst, inst.v_star).objective
    rates = []
    for seed in range(200):
        log = run_episode(inst, make_static_oracle(inst), seed)
        rates.append(log.revenues[:log.t_stop].mean())
    rates = np.array(rates)
    assert abs(rates.mean() - opt) <= 3 * rates.std(ddof=1) / np.sqrt(len(rates)) + 1e-3


def test_assumption_1_flags():
    inst = tiny(N=2, T=100, c=0.01)
    rep = check_assumption_1(inst.public_view(), tau=100, delta=0.1)
    assert not rep.ok_i
    big = tiny(N=2, T=10**9, c=0.5)
    rep = check_assumption_1(big.public_view(), tau=10**8, delta=0.1)
    assert rep.ok_ii("C=B") and rep.ok_ii("C=1")
    assert set(rep.cond_ii) == {"C=B", "C=1"}
    assert any("(ii)" in line for line in rep.lines())
    g1 = generate_instance(PRESET_CLASSES["gamma1"], 250, seed=0)
    rep = check_assumption_1(g1.public_view(), tau_for_horizon(250), 0.1)
    assert not (rep.ok_i and rep.ok_ii("C=B"))
