import math

import numpy as np
import pytest

from onlineassort.instance import Instance
from onlineassort.lp import AssortmentDistribution, solve_lp
from onlineassort.mnl import AssortmentFamily, UtilityVector, enumerate_family, expected_revenue
from onlineassort.policies import OnlineTau, Policy, make_static_oracle
from onlineassort.simulator import (
    PRESET_CLASSES,
    ContractViolation,
    audit_run,
    compute_benchmark,
    generate_instance,
    run_episode,
    support_match,
)
from onlineassort.verify import enumeration_lp


class Fixed(Policy):
    def __init__(self, view, S):
        super().__init__(view)
        self.S = S

    def next_assortment(self, t, remaining, rng):
        return self.S


def free_instance(T=10_000):
    return Instance(r=[0.8, 0.5, 0.9], a=np.zeros((0, 3)), c=[], T=T,
                    family=AssortmentFamily.cardinality(3, 2), v_star=UtilityVector([1.2, 2.0, 0.6], 2.0))


def test_empty_policy_earns_nothing():
    inst = generate_instance(PRESET_CLASSES["gamma1"], 200, seed=1)
    log = run_episode(inst, Fixed(inst.public_view(), ()), seed=0)
    assert log.total_revenue == 0.0
    assert np.array_equal(log.final_capacities, inst.capacities)


def test_non_member_offer_is_rejected():
    inst = generate_instance(PRESET_CLASSES["gamma1"], 200, seed=1)
    with pytest.raises(ContractViolation):
        run_episode(inst, Fixed(inst.public_view(), tuple(range(1, 8))), seed=0)


def test_static_oracle_unconstrained_revenue_rate():
    inst = free_instance()
    best = max(expected_revenue(inst.v_star, S, inst.r) for S in enumerate_family(inst.family))
    log = run_episode(inst, make_static_oracle(inst), seed=11)
    sigma = log.revenues.std(ddof=1) / math.sqrt(inst.T)
    assert abs(log.revenues.mean() - best) <= 3 * sigma


def test_run_log_is_deterministic():
    inst = generate_instance(PRESET_CLASSES["gamma4"], 300, seed=2)
    logs = [run_episode(inst, OnlineTau(inst.public_view(), 40), seed=99) for _ in range(2)]
    assert logs[0].to_text() == logs[1].to_text()
    assert not audit_run(inst, logs[0])
    other = run_episode(inst, OnlineTau(inst.public_view(), 40), seed=100)
    assert other.to_text() != logs[0].to_text()


def test_generate_instance_classes():
    g1 = generate_instance(PRESET_CLASSES["gamma1"], 500, seed=0)
    assert (g1.N, g1.K) == (10, 5)
    assert g1.family == AssortmentFamily.cardinality(10, 6)
    assert np.all(g1.v_star.values >= 1 / 3) and np.all(g1.v_star.values <= 3)
    assert np.allclose(g1.T * g1.c, np.round(g1.T * g1.c))
    g4 = generate_instance(PRESET_CLASSES["gamma4"], 500, seed=0)
    assert g4.family == AssortmentFamily.partition(10, 2, 3)
    again = generate_instance(PRESET_CLASSES["gamma1"], 500, seed=0)
    assert g1.to_dict() == again.to_dict()
    assert generate_instance(PRESET_CLASSES["gamma1"], 500, seed=1).to_dict() != g1.to_dict()


def test_instance_json_roundtrip(tmp_path):
    g = generate_instance(PRESET_CLASSES["gamma5"], 300, seed=4)
    g.save(tmp_path / "i.json")
    back = Instance.load(tmp_path / "i.json")
    assert back.to_dict() == g.to_dict()


def test_benchmark():
    inst = free_instance(T=100)
    best = max(expected_revenue(inst.v_star, S, inst.r) for S in enumerate_family(inst.family))
    assert compute_benchmark(inst)[0] == pytest.approx(100 * best)
    g = generate_instance(PRESET_CLASSES["gamma1"], 400, seed=3)
    assert compute_benchmark(g)[0] == pytest.approx(400 * enumeration_lp(g, g.v_star.values), abs=1e-6)


def test_support_match():
    y = AssortmentDistribution([((1,), 0.4), ((2, 3), 0.6)])
    assert support_match(y, AssortmentDistribution([((2, 3), 0.1), ((1,), 0.9)]))
    assert not support_match(AssortmentDistribution.point(()), AssortmentDistribution.point((1,)))


def test_benchmark_dominance_quick():
    inst = generate_instance(PRESET_CLASSES["gamma1"], 300, seed=5)
    bench, lp = compute_benchmark(inst)
    rev = np.array([run_episode(inst, make_static_oracle(inst, lp_result=lp), s).total_revenue for s in range(100)])
    assert rev.mean() <= bench + 3 * rev.std(ddof=1) / 10
    assert lp.objective == solve_lp(inst, inst.v_star).objective
