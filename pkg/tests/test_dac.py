import math

import numpy as np
import pytest

from metaoc.dac import DacDomain, DisturbanceHistory, as_params, control_action, horizon, project, recover_disturbance
from metaoc.errors import InvalidArgument
from metaoc.lds import SystemMatrices, step


@pytest.mark.parametrize("T,H", [(2, 1), (25, 5), (400, 9), (3, 2), (4, 2), (5, 3)])
def test_horizon(T, H):
    assert horizon(T, 0.5) == H


def test_horizon_errors():
    with pytest.raises(InvalidArgument):
        horizon(1, 0.5)
    with pytest.raises(InvalidArgument):
        horizon(10, 1.0)


def test_domain_radii_and_diameter():
    dom = DacDomain(3, 1, 1, kappa=1.0, kappa_B=1.0, gamma=0.5)
    np.testing.assert_allclose(dom.radii, [0.5, 0.25, 0.125])
    assert dom.diameter == pytest.approx(2 * math.sqrt(0.25 + 0.0625 + 0.015625))
    assert dom.diameter == pytest.approx(1.1456, abs=1e-4)


def test_projection_hand_example():
    dom = DacDomain(1, 1, 2, kappa=1.0, kappa_B=1.0, gamma=0.5)
    np.testing.assert_allclose(project([[[2.0, 0.0]]], dom), [[[0.5, 0.0]]])


def test_projection_fixed_point_and_block_separable():
    rng = np.random.default_rng(0)
    dom = DacDomain(4, 2, 3, kappa=1.2, kappa_B=1.0, gamma=0.4)
    inside = dom.sample(rng)
    np.testing.assert_array_equal(project(inside, dom), inside)
    M = rng.standard_normal(dom.shape)
    P = project(M, dom)
    for k in range(dom.H):
        single = DacDomain(1, 2, 3, kappa=1.2, kappa_B=1.0, gamma=0.4)
        r = dom.radii[k]
        block = M[k] if np.linalg.norm(M[k]) <= r else M[k] * r / np.linalg.norm(M[k])
        np.testing.assert_allclose(P[k], block, rtol=1e-15, atol=1e-15)
    with pytest.raises(InvalidArgument):
        project(np.zeros((3, 2, 3)), dom)


def test_sample_is_feasible():
    dom = DacDomain(5, 1, 2, kappa=math.sqrt(2), kappa_B=1.0, gamma=0.5)
    S = dom.sample(np.random.default_rng(1), 500)
    assert all(dom.contains(M) for M in S)


def test_control_action_examples():
    K = [[0.1, 0.1]]
    assert np.all(control_action(np.zeros((1, 2)), np.zeros((1, 1, 2)), [3, 4], np.ones((1, 2))) == 0)
    np.testing.assert_allclose(control_action(K, np.zeros((2, 1, 2)), [1, 1], np.zeros((2, 2))), [-0.2])
    hist = DisturbanceHistory(1, 2)
    hist.push([0.5, 0.0])
    np.testing.assert_allclose(control_action(K, [[[1.0, 0.0]]], [1, 1], hist), [0.3])


def test_control_action_shape_errors():
    with pytest.raises(InvalidArgument):
        control_action([[0.1, 0.1]], np.zeros((2, 1, 2)), [1, 1], np.zeros((3, 2)))
    with pytest.raises(InvalidArgument):
        as_params(np.zeros((2, 2)))


def test_history_ordering_and_padding():
    hist = DisturbanceHistory(3, 1)
    assert np.all(hist.as_array() == 0)
    for v in (1.0, 2.0):
        hist.push([v])
    np.testing.assert_array_equal(hist.as_array()[:, 0], [2.0, 1.0, 0.0])
    hist.push([3.0])
    hist.push([4.0])
    np.testing.assert_array_equal(hist.as_array()[:, 0], [4.0, 3.0, 2.0])
    np.testing.assert_array_equal(DisturbanceHistory.from_array(hist.as_array()).as_array(), hist.as_array())


def test_recover_disturbance_examples():
    sys = SystemMatrices(0.5 * np.eye(2), [[1.0], [0.0]])
    np.testing.assert_allclose(recover_disturbance(sys, [1, 1], [1], [2, 0]), [0.5, -0.5])
    rng = np.random.default_rng(2)
    for _ in range(100):
        x, u, w = rng.standard_normal(2), rng.standard_normal(1), rng.standard_normal(2)
        np.testing.assert_allclose(recover_disturbance(sys, x, u, step(sys, x, u, w)), w, atol=1e-12)
    assert np.all(recover_disturbance(sys, [1, 1], [1], step(sys, [1, 1], [1], [0, 0])) == 0)
