import random

import numpy as np
import pytest

from metaoc.bench import (
    ComparatorChoice,
    best_linear_feedback,
    meta_regret,
    run_independent_oc,
    run_non_adaptive,
    task_regret,
)
from metaoc.dac import DacDomain
from metaoc.errors import InvalidArgument, InvalidConfiguration
from metaoc.lds import DisturbanceSource, SystemBounds, SystemMatrices, synthesize_stabilizer
from metaoc.harness.config import ExperimentConfig
from metaoc.harness.experiment import suite_constants
from metaoc.meta import compute_constants, hindsight_optimum
from metaoc.oc import TaskSpec, default_step_size, make_config, run_oc
from metaoc.surrogate import QuadraticCost


def test_meta_regret_examples():
    assert meta_regret([2.5]) == 2.5
    assert meta_regret([1, 3]) == 2
    vals = list(np.random.default_rng(0).standard_normal(50))
    shuffled = vals[:]
    random.Random(1).shuffle(shuffled)
    assert meta_regret(vals) == pytest.approx(meta_regret(shuffled), rel=1e-14)
    with pytest.raises(InvalidArgument):
        meta_regret([])


def test_non_adaptive_zero_rollout(bench_task):
    task, bounds, K = bench_task
    zero = TaskSpec(task.sys, task.T, task.costs, DisturbanceSource("zero", 1.0, 0, 2))
    rec = run_non_adaptive(zero, K)
    assert np.all(rec.states == 0) and rec.total_cost == 0


def test_non_adaptive_equals_frozen_oc(bench_task):
    task, bounds, K = bench_task
    a = run_non_adaptive(task, K, H=5)
    b = run_oc(task, make_config(task, K, bounds, 0.0, H=5))
    np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-15)
    np.testing.assert_allclose(a.costs, b.costs, rtol=1e-14)
    np.testing.assert_allclose(a.surrogate_costs, b.surrogate_costs, rtol=1e-12)


def test_self_comparison_regret_small(task_factory):
    """Playing the hindsight optimum from the start leaves only the approximation residual."""
    task, bounds = task_factory(2, T=200, kind="sinusoidal")
    K = synthesize_stabilizer(task.sys, bounds).K
    probe = run_oc(task, make_config(task, K, bounds, 0.0))
    M_star = hindsight_optimum(probe.context(task), task.costs, DacDomain.from_bounds(bounds, probe.H, 1, 2)).M
    rec = run_oc(task, make_config(task, K, bounds, 0.0, M_init=M_star))
    rec.M_star = M_star
    regret = task_regret(rec, task)
    assert regret == pytest.approx(rec.cost_approximation, abs=1e-9)
    assert abs(regret) < 0.05 * rec.total_cost


def test_identical_records_identical_regret(bench_task):
    task, bounds, K = bench_task
    recs = [run_oc(task, make_config(task, K, bounds, 0.2)) for _ in range(2)]
    for r in recs:
        r.M_star = hindsight_optimum(r.context(task), task.costs, DacDomain.from_bounds(bounds, 5, 1, 2)).M
    assert task_regret(recs[0], task) - task_regret(recs[1], task) == 0.0


def test_scalar_regret_closed_form():
    # A = 0, B = 1, K = 0, H = 1, w = 0.5 constant, c = x^2 + u^2, frozen at M = 0
    T, w = 30, 0.5
    sys = SystemMatrices([[0.0]], [[1.0]])
    task = TaskSpec.with_disturbances(sys, [QuadraticCost([[1.0]], [[1.0]])] * T, np.full(T, w))
    bounds = SystemBounds(kappa=1.0, gamma=0.5)
    rec = run_oc(task, make_config(task, [[0.0]], bounds, 0.0, H=1))
    # realized cost: x_1 = 0, x_t = w afterwards, u = 0
    realized = (T - 1) * w**2
    # F(M) = w^2 (1 + M)^2 (T-2) + w^2 + w^2 M^2 (T-1); minimizer:
    M_star = -(T - 2) / ((T - 2) + (T - 1))
    dom = DacDomain.from_bounds(bounds, 1, 1, 1)
    M_star = max(M_star, -dom.radii[0])
    F_star = w**2 * (1 + M_star) ** 2 * (T - 2) + w**2 + w**2 * M_star**2 * (T - 1)
    rec.M_star = hindsight_optimum(rec.context(task), task.costs, dom).M
    assert task_regret(rec, task) == pytest.approx(realized - F_star, abs=1e-9)


def test_grid_comparator(bench_task):
    task, bounds, K = bench_task
    choice = ComparatorChoice(kind="grid-linear-feedback", resolution=21, kappa=bounds.kappa, gamma=bounds.gamma)
    K_best, J = best_linear_feedback(task, task.disturbances, choice)
    rec = run_non_adaptive(task, K_best)
    assert rec.total_cost == pytest.approx(J, rel=1e-12)
    assert task_regret(rec, task, choice) == pytest.approx(0.0, abs=1e-12)
    # the grid optimum is no worse than the zero gain when zero is admissible
    assert J <= run_non_adaptive(task, np.zeros((1, 2))).total_cost + 1e-12


def test_grid_comparator_rejects_large_systems(task_factory):
    task, _ = task_factory(0, n=3, m=2)
    with pytest.raises(InvalidConfiguration):
        best_linear_feedback(task, task.disturbances, ComparatorChoice(kind="grid-linear-feedback"))
    with pytest.raises(InvalidArgument):
        ComparatorChoice(kind="best-policy")


def test_independent_oc_bitwise_equals_direct(task_factory):
    tasks = [task_factory(s, kind="sinusoidal")[0] for s in range(3)]
    bounds = SystemBounds.default_for(2, 1)
    consts = compute_constants(bounds, 5, 2.0)
    rep = run_independent_oc(tasks, consts)
    for task, rec in zip(tasks, rep.records):
        K = synthesize_stabilizer(task.sys, bounds).K
        eta = default_step_size(consts.D_diameter, consts, task.T)
        direct = run_oc(task, make_config(task, K, bounds, eta))
        for field in ("states", "inputs", "costs", "params", "surrogate_costs", "ideal_costs"):
            assert np.array_equal(getattr(rec, field), getattr(direct, field))


def test_independent_beats_non_adaptive_on_sinusoid(task_factory):
    consts = suite_constants(ExperimentConfig(), 25)
    bounds = consts.bounds
    fixed, learned = [], []
    for seed in range(10):
        task, _ = task_factory(seed, kind="sinusoidal")
        K = synthesize_stabilizer(task.sys, bounds).K
        fixed.append(run_non_adaptive(task, K).total_cost)
        eta = default_step_size(consts.D_diameter, consts, task.T)
        learned.append(run_oc(task, make_config(task, K, bounds, eta)).total_cost)
    assert np.mean(fixed) > np.mean(learned)
