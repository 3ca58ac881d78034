"""Acceptance criteria, one test per criterion.

Each test prints a ``CRITERION <n> PASS|FAIL`` line (also repeated in the
terminal summary).  Run with ``pytest tests/test_acceptance.py -v -s``.
"""
import math

import numpy as np
import pytest

from onlineassort.experiment import PolicyConfig, aggregate, run_model
from onlineassort.lp import OPTIMAL
from onlineassort.policies import OnlineTau, UCBPolicy, UniformRandom, make_static_oracle, tau_for_horizon
from onlineassort.simulator import (
    PRESET_CLASSES,
    ClassTuple,
    audit_run,
    compute_benchmark,
    generate_instance,
    run_episode,
)
from onlineassort.verify import run_suite

MASTER_SEED = 0
HORIZONS = [250, 500, 1000, 2000, 5000]
MODELS = 3
RUNS = 100
POLICY = PolicyConfig(type="online_tau", tau_rule="T^{2/3}", delta=0.1)

# Every run simulated in this module is audited; criterion 9 reads the tally.
AUDIT = {"runs": 0, "problems": 0}


def audit(instance, log):
    problems = audit_run(instance, log)
    AUDIT["runs"] += 1
    AUDIT["problems"] += len(problems)
    return problems


def emit(log_lines, n, ok, detail):
    line = f"CRITERION {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    log_lines.append(line)


def sweep(cls, horizons, class_idx):
    rows = []
    for T in horizons:
        for m in range(MODELS):
            inst = generate_instance(cls, T, _model_seed(class_idx, m))
            r, _, logs = run_model(cls, class_idx, T, m, RUNS, POLICY, MASTER_SEED)
            for lg in logs:
                audit(inst, lg)
            rows.extend(r)
    return rows


def _model_seed(class_idx, m):
    from onlineassort.experiment import model_seed
    return model_seed(MASTER_SEED, class_idx, m)


@pytest.fixture(scope="module")
def gamma1_sweep():
    rows = sweep(PRESET_CLASSES["gamma1"], HORIZONS, 0)
    cells, slopes = aggregate(rows)
    return rows, cells, slopes


@pytest.fixture(scope="module")
def gamma3_short():
    rows = sweep(PRESET_CLASSES["gamma3"], [250], 2)
    cells, _ = aggregate(rows)
    return rows, cells


def test_criterion_01_regret_slope(gamma1_sweep, acceptance_log):
    _, cells, slopes = gamma1_sweep
    slope = slopes["gamma1"]
    regrets = ", ".join(f"T={c['T']}:{c['mean_regret']:.2f}" for c in cells)
    ok = slope is not None and 0.50 <= slope <= 0.85
    emit(acceptance_log, 1, ok, f"log-log regret slope {slope:.3f} in [0.50, 0.85] ({regrets})")
    assert ok


def test_criterion_02_ratio_convergence(gamma1_sweep, acceptance_log):
    _, cells, _ = gamma1_sweep
    ratio = {c["T"]: c["mean_ratio"] for c in cells}
    gain = ratio[5000] - ratio[250]
    ok = gain >= 0.05 and ratio[5000] >= 0.80
    emit(acceptance_log, 2, ok, f"ratio T=250 {ratio[250]:.4f}, T=5000 {ratio[5000]:.4f}, gain {gain:.4f} "
                                f"(need gain >= 0.05 and final >= 0.80)")
    assert ok


def test_criterion_03_short_horizon(gamma3_short, acceptance_log):
    _, cells = gamma3_short
    ratio = cells[0]["mean_ratio"]
    ok = ratio >= 0.5
    emit(acceptance_log, 3, ok, f"gamma3 T=250 mean ratio {ratio:.4f} >= 0.5 over {cells[0]['runs']} runs")
    assert ok


def test_criterion_04_cg_efficiency(gamma1_sweep, gamma3_short, acceptance_log):
    rows = gamma1_sweep[0] + gamma3_short[0]
    solved = [r for r in rows if r["lp_status"]]
    cg_max = max(r["cg_iter_max"] for r in solved)
    bad = [r for r in solved if r["lp_status"] != OPTIMAL]
    ok = cg_max <= 100 and not bad and len(solved) > 0
    emit(acceptance_log, 4, ok, f"{len(solved)} LP(v_hat) solves, max CG iterations {cg_max} <= 100, "
                                f"non-optimal {len(bad)}")
    assert ok


@pytest.mark.parametrize("n, suite", [(5, "lp-oracle"), (6, "pricing-oracle"), (7, "mle"), (8, "lipschitz")])
def test_criteria_05_to_08_oracle_suites(n, suite, acceptance_log):
    res = run_suite(suite, seed=0)
    emit(acceptance_log, n, res.ok, res.line())
    assert res.ok


def small_instance(T):
    cls = ClassTuple({"kind": "cardinality", "B": 2}, 3, 1, 2.0, "small")
    return generate_instance(cls, T, seed=11)


def test_criterion_10_benchmark_dominance(acceptance_log):
    inst = small_instance(150)
    bench, lp = compute_benchmark(inst)
    view = inst.public_view()
    makers = {
        "online_tau": lambda: OnlineTau(view, tau_for_horizon(inst.T)),
        "ucb": lambda: UCBPolicy(view, psi_scale=1e-5),
        "static_oracle": lambda: make_static_oracle(inst, lp_result=lp),
        "uniform_random": lambda: UniformRandom(view),
    }
    parts, ok = [], True
    for name, make in makers.items():
        rev = []
        for seed in range(200):
            lg = run_episode(inst, make(), seed)
            audit(inst, lg)
            rev.append(lg.total_revenue)
        rev = np.array(rev)
        bound = bench + 3 * rev.std(ddof=1) / math.sqrt(len(rev))
        ok &= rev.mean() <= bound
        parts.append(f"{name} {rev.mean():.3f} <= {bound:.3f}")
    emit(acceptance_log, 10, ok, f"T*Opt = {bench:.3f}; " + "; ".join(parts))
    assert ok


def test_criterion_11_coverage(acceptance_log):
    res = run_suite("coverage", seed=0)
    emit(acceptance_log, 11, res.ok, res.line())
    assert res.ok


def test_criterion_12_ucb_sanity(acceptance_log):
    inst = small_instance(2000)
    bench, _ = compute_benchmark(inst)
    view = inst.public_view()
    ucb_rev, uni_rev = [], []
    omega = None
    for seed in range(5):
        pol = UCBPolicy(view, psi_scale=1e-4)
        omega = pol.omega
        lg = run_episode(inst, pol, seed)
        audit(inst, lg)
        ucb_rev.append(lg.total_revenue)
        lg = run_episode(inst, UniformRandom(view), seed)
        audit(inst, lg)
        uni_rev.append(lg.total_revenue)
    ucb_regret = bench - np.mean(ucb_rev)
    uni_regret = bench - np.mean(uni_rev)
    ok = omega < 1 and ucb_regret < uni_regret and AUDIT["problems"] == 0
    emit(acceptance_log, 12, ok, f"omega={omega:.3f} (psi_scale=1e-4), T=2000 regret: UCB {ucb_regret:.1f} "
                                 f"< uniform {uni_regret:.1f} over 5 runs")
    assert ok


def test_criterion_09_hard_feasibility(acceptance_log):
    # runs last in this module so the tally covers every simulated run above
    res = run_suite("feasibility", seed=0)
    ok = AUDIT["problems"] == 0 and res.ok
    emit(acceptance_log, 9, ok, f"{AUDIT['runs']} audited runs in this module with {AUDIT['problems']} problems; "
                                f"{res.line()}")
    assert ok
