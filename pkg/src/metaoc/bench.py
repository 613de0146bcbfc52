"""Baselines and regret accounting."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dac import horizon
from .errors import DivergenceError, InvalidArgument, InvalidConfiguration
from .oc import DIVERGENCE_LIMIT, TaskRecord, default_step_size, ideal_costs
from .surrogate import QuadraticCost, SurrogateContext, surrogate_cost_g

COMPARATORS = ("hindsight-dac", "grid-linear-feedback")


@dataclass(frozen=True)
class ComparatorChoice:
    kind: str = "hindsight-dac"
    resolution: int = 11
    # grid entries span [-kappa, kappa]; gains must also satisfy rho(A - BK) <= 1 - gamma
    kappa: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        if self.kind not in COMPARATORS:
            raise InvalidArgument(f"unknown comparator {self.kind!r}")
        if self.resolution < 2:
            raise InvalidArgument("grid resolution must be >= 2")


def run_non_adaptive(task, K, H=None, gamma=0.5):
    """Fixed linear feedback ``u = -K x`` for the whole task.

    The record carries zero DAC parameters so that surrogate bookkeeping stays
    comparable with the learning controllers.
    """
    sys, T = task.sys, task.T
    K = np.atleast_2d(np.asarray(K, dtype=float))
    H = horizon(T, gamma) if H is None else H
    w = task.disturbances
    states = np.zeros((T + 1, sys.n))
    inputs = np.zeros((T, sys.m))
    costs = np.zeros(T)
    recovered = np.zeros((T, sys.n))
    for t in range(T):
        x = states[t]
        u = -K @ x
        x_next = sys.A @ x + sys.B @ u + w[t]
        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state norm exceeded {DIVERGENCE_LIMIT:g} at t={t + 1}")
        recovered[t] = x_next - sys.A @ x - sys.B @ u
        costs[t] = task.costs[t](x, u)
        inputs[t] = u
        states[t + 1] = x_next
    ctx = SurrogateContext(K, sys, recovered, H)
    params = np.zeros((T + 1, H, sys.m, sys.n))
    g = np.array([surrogate_cost_g(ctx, params[0], task.costs[t - 1], t) for t in range(1, T + 1)])
    return TaskRecord(
        states=states,
        inputs=inputs,
        disturbances=recovered,
        costs=costs,
        surrogate_costs=g,
        ideal_costs=ideal_costs(ctx, params, task.costs),
        params=params,
        K=K,
        eta=0.0,
        seed=task.seed,
    )


def comparator_cost(record, task, comparator=None):
    comparator = comparator or ComparatorChoice()
    if comparator.kind == "hindsight-dac":
        if record.M_star is None:
            raise InvalidArgument("record has no hindsight optimum; solve it first")
        ctx = record.context(task)
        return float(sum(surrogate_cost_g(ctx, record.M_star, task.costs[t - 1], t) for t in range(1, task.T + 1)))
    return best_linear_feedback(task, record.disturbances, comparator)[1]


def task_regret(record, task, comparator=None):
    """Realized cost minus the comparator's cost on the same disturbances."""
    return record.total_cost - comparator_cost(record, task, comparator)


def meta_regret(regrets):
    regrets = list(regrets)
    if not regrets:
        raise InvalidArgument("meta-regret of an empty list is undefined")
    return float(np.mean(regrets))


def best_linear_feedback(task, disturbances, comparator):
    """Grid search for the best fixed gain ``u = -K x`` in hindsight (tiny systems only)."""
    sys, T = task.sys, task.T
    if sys.m * sys.n > 4:
        raise InvalidConfiguration("grid-linear-feedback comparator needs m*n <= 4")
    axis = np.linspace(-comparator.kappa, comparator.kappa, comparator.resolution)
    Ks = np.array(list(itertools.product(axis, repeat=sys.m * sys.n))).reshape(-1, sys.m, sys.n)
    closed = sys.A[None] - sys.B[None] @ Ks
    rho = np.max(np.abs(np.linalg.eigvals(closed)), axis=1)
    knorm = np.linalg.norm(Ks, ord=2, axis=(1, 2))
    Ks = Ks[(rho <= 1 - comparator.gamma) & (knorm <= comparator.kappa)]
    if len(Ks) == 0:
        raise InvalidConfiguration("no grid gain satisfies the stability constraints")
    X = np.zeros((len(Ks), sys.n))
    total = np.zeros(len(Ks))
    for t in range(T):
        U = -np.einsum("gab,gb->ga", Ks, X)
        c = task.costs[t]
        if isinstance(c, QuadraticCost):
            D = X - c.x_ref
            total += np.einsum("ga,ab,gb->g", D, c.Q, D) + np.einsum("ga,ab,gb->g", U, c.R, U)
        else:
            total += np.array([c(x, u) for x, u in zip(X, U)])
        X = X @ sys.A.T + U @ sys.B.T + disturbances[t]
    best = int(np.argmin(total))
    return Ks[best], float(total[best])


def run_independent_oc(tasks, consts):
    """Online control restarted from zero on every task, step size from the full domain diameter."""
    from .meta import MetaReport, _append, solve_task

    report = MetaReport("independent-oc", [], [], [], [], [])
    for index, task in enumerate(tasks):
        eta = default_step_size(consts.D_diameter, consts, task.T)
        M_init = np.zeros((consts.H, task.sys.m, task.sys.n))
        rec, hs, regret = solve_task(task, consts, eta, M_init, index)
        _append(report, rec, hs, regret, M_init, eta)
    return report


def run_non_adaptive_suite(tasks, consts):
    from .meta import MetaReport, _append, _stabilize, hindsight_optimum
    from .dac import DacDomain

    report = MetaReport("non-adaptive", [], [], [], [], [])
    for index, task in enumerate(tasks):
        K = _stabilize(task, consts.bounds, index).K
        rec = run_non_adaptive(task, K, H=consts.H)
        dom = DacDomain.from_bounds(consts.bounds, consts.H, task.sys.m, task.sys.n)
        hs = hindsight_optimum(rec.context(task), task.costs, dom)
        rec.M_star = hs.M
        _append(report, rec, hs, task_regret(rec, task), dom.zeros(), 0.0)
    return report
