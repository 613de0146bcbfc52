import math

import numpy as np
import pytest

from metaoc.dac import DacDomain, horizon
from metaoc.errors import DivergenceError, InvalidArgument
from metaoc.lds import DisturbanceSource, SystemBounds, SystemMatrices, synthesize_stabilizer
from metaoc.meta import ConstantsBundle, compute_constants, hindsight_optimum, policy_regret_bound
from metaoc.oc import OcConfig, TaskSpec, default_step_size, ideal_costs, make_config, run_oc
from metaoc.surrogate import QuadraticCost, SurrogateContext, ideal_cost_f


def scalar_task(T=40, w=0.5):
    sys = SystemMatrices([[0.0]], [[1.0]])
    costs = [QuadraticCost([[1.0]], [[1.0]])] * T
    return TaskSpec.with_disturbances(sys, costs, np.full(T, w))


def test_scalar_ogd_matches_reference():
    bounds = SystemBounds(kappa=1.0, gamma=0.5)
    T, eta, M0 = 40, 0.05, 0.1
    task = scalar_task(T)
    cfg = make_config(task, [[0.0]], bounds, eta, M_init=np.array([[[M0]]]), H=1)
    rec = run_oc(task, cfg)

    # straight-line reference: s = w_{t-1} + M w_{t-2}, a = M w_{t-1}, c = s^2 + a^2
    r1 = 0.5
    w = [0.0, 0.0] + [0.5] * T  # w[j + 1] is w_j
    M, ref = M0, [M0]
    for t in range(1, T + 1):
        s, a = w[t] + M * w[t - 1], M * w[t]
        grad = 2 * s * w[t - 1] + 2 * a * w[t]
        M = min(max(M - eta * grad, -r1), r1)
        ref.append(M)
    np.testing.assert_allclose(rec.params[:, 0, 0, 0], ref, rtol=0, atol=1e-12)


def test_zero_disturbance_rollout(bench_task):
    task, bounds, K = bench_task
    zero = TaskSpec(task.sys, task.T, task.costs, DisturbanceSource("zero", 1.0, 0, 2))
    M_init = DacDomain.from_bounds(bounds, 5, 1, 2).sample(np.random.default_rng(0))
    rec = run_oc(zero, make_config(zero, K, bounds, 0.1, M_init=M_init))
    assert np.all(rec.states == 0) and np.all(rec.inputs == 0) and rec.total_cost == 0


def test_zero_step_freezes_parameters(bench_task):
    task, bounds, K = bench_task
    M_init = DacDomain.from_bounds(bounds, 5, 1, 2).sample(np.random.default_rng(1))
    rec = run_oc(task, make_config(task, K, bounds, 0.0, M_init=M_init))
    assert all(np.array_equal(P, M_init) for P in rec.params)


def test_record_invariants(bench_task):
    task, bounds, K = bench_task
    cfg = make_config(task, K, bounds, 0.5)
    rec = run_oc(task, cfg)
    assert rec.states.shape == (26, 2) and rec.params.shape == (26, 5, 1, 2)
    assert all(cfg.dom.contains(P) for P in rec.params)
    np.testing.assert_allclose(rec.disturbances, task.disturbances, atol=1e-14)
    assert np.all(np.linalg.norm(rec.disturbances, axis=1) <= 1.0 + 1e-12)
    assert rec.cost_approximation == pytest.approx(np.sum(rec.costs) - np.sum(rec.ideal_costs))


def test_determinism(bench_task):
    task, bounds, K = bench_task
    a = run_oc(task, make_config(task, K, bounds, 0.3))
    b = run_oc(task, make_config(task, K, bounds, 0.3))
    for field in ("states", "inputs", "costs", "surrogate_costs", "params", "ideal_costs"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_vectorized_ideal_costs_match_reference(bench_task):
    task, bounds, K = bench_task
    rec = run_oc(task, make_config(task, K, bounds, 0.4))
    ctx = rec.context(task)
    H = rec.H
    for t in range(1, task.T + 1):
        window = rec.params[[max(j, 1) - 1 for j in range(t - H, t + 1)]]
        assert rec.ideal_costs[t - 1] == pytest.approx(ideal_cost_f(ctx, window, task.costs[t - 1], t), rel=1e-12, abs=1e-15)


def test_divergence_guard():
    sys = SystemMatrices([[1.0]], [[1.0]])
    task = TaskSpec(sys, 40, [QuadraticCost([[1.0]], [[1.0]])] * 40, DisturbanceSource("sign-alternating", 1.0, 0, 1))
    dom = DacDomain(1, 1, 1, 1.0, 1.0, 0.5)
    cfg = OcConfig(eta=0.0, H=1, dom=dom, M_init=dom.zeros(), K=np.array([[-2.0]]))
    with pytest.raises(DivergenceError):
        run_oc(task, cfg)


def test_config_validation(bench_task):
    task, bounds, K = bench_task
    dom = DacDomain.from_bounds(bounds, 5, 1, 2)
    with pytest.raises(InvalidArgument):
        OcConfig(eta=-1.0, H=5, dom=dom, M_init=dom.zeros(), K=K)
    with pytest.raises(InvalidArgument):
        OcConfig(eta=0.1, H=5, dom=dom, M_init=np.full(dom.shape, 10.0), K=K)
    with pytest.raises(InvalidArgument):
        OcConfig(eta=0.1, H=4, dom=dom, M_init=dom.zeros(), K=K)


def bundle(G_f, L, H):
    return ConstantsBundle(D_tilde=1.0, G_f=G_f, L=L, D_nominal=1.0, D_diameter=1.0, G_tilde=math.sqrt(G_f * (G_f / 2 + L * H**2)), H=H, d=1.0, bounds=SystemBounds())


def test_default_step_size_examples():
    c = bundle(2.0, 1.0, 2)
    assert default_step_size(1.0, c, 25) == pytest.approx(1 / math.sqrt(250))
    assert default_step_size(1.0, c, 25) == pytest.approx(0.06325, abs=1e-5)
    assert default_step_size(2.0, c, 25) == 2 * default_step_size(1.0, c, 25)
    assert default_step_size(1.0, c, 100) == pytest.approx(default_step_size(1.0, c, 25) / 2, rel=1e-15)
    with pytest.raises(InvalidArgument):
        default_step_size(0.0, c, 25)
    with pytest.raises(InvalidArgument):
        default_step_size(1.0, c, 1)


def test_residual_shrinks_with_history(task_factory):
    task, bounds = task_factory(5, T=200, kind="sinusoidal")
    K = synthesize_stabilizer(task.sys, bounds).K
    res = [abs(run_oc(task, make_config(task, K, bounds, 0.05, H=H)).cost_approximation) for H in (2, 4, 8)]
    assert res[0] > res[1] > res[2]


def test_policy_regret_term_within_bound(task_factory):
    for seed in range(5):
        task, bounds = task_factory(seed)
        K = synthesize_stabilizer(task.sys, bounds).K
        H = horizon(task.T, bounds.gamma)
        consts = compute_constants(bounds, H, 2.0)
        eta = default_step_size(consts.D_diameter, consts, task.T)
        cfg = make_config(task, K, bounds, eta)
        rec = run_oc(task, cfg)
        hs = hindsight_optimum(rec.context(task), task.costs, cfg.dom)
        measured = np.sum(rec.surrogate_costs) - hs.value
        assert measured <= policy_regret_bound(np.linalg.norm(hs.M), eta, consts, task.T)
