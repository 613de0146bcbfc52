import numpy as np
import pytest

from metaoc.lds import DisturbanceSource, SystemBounds, SystemMatrices, synthesize_stabilizer
from metaoc.oc import TaskSpec
from metaoc.surrogate import QuadraticCost


def build_task(seed, T=25, n=2, m=1, kind="uniform-ball"):
    """A benchmark-style task: perturbed nominal A, fixed B, random diagonal costs."""
    rng = np.random.default_rng(seed)
    bounds = SystemBounds.default_for(n, m)
    A = np.eye(n) / (2 * n) + rng.random((n, n)) / (5 * n)
    B = np.full((n, m), 0.5)
    B *= min(1.0, 1.0 / np.linalg.norm(B, 2))
    sys = SystemMatrices(A, B, bounds)
    costs = [QuadraticCost(np.diag(rng.uniform(0.375, 0.625, n)), np.diag(rng.uniform(0.375, 0.625, m))) for _ in range(T)]
    task = TaskSpec(sys, T, costs, DisturbanceSource(kind, 1.0, seed, n), seed=seed)
    return task, bounds


@pytest.fixture
def task_factory():
    return build_task


@pytest.fixture
def bench_task():
    task, bounds = build_task(3)
    K = synthesize_stabilizer(task.sys, bounds).K
    return task, bounds, K


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
