"""Task-specific online control: projected online gradient descent on g_t."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dac import DacDomain, as_params, control_action, horizon, recover_disturbance
from .errors import DivergenceError, InvalidArgument
from .lds import DisturbanceSource, SystemMatrices, step
from .surrogate import CostFunction, SurrogateContext, surrogate_value_and_grad

DIVERGENCE_LIMIT = 1e6


@dataclass
class TaskSpec:
    """One control task: dynamics, horizon, per-step costs and disturbance source."""

    sys: SystemMatrices
    T: int
    costs: List[CostFunction]
    disturbance: DisturbanceSource
    seed: int = 0
    _w: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.T < 1:
            raise InvalidArgument("T must be >= 1")
        if len(self.costs) != self.T:
            raise InvalidArgument(f"expected {self.T} cost functions, got {len(self.costs)}")
        if self.disturbance.n != self.sys.n:
            raise InvalidArgument("disturbance dimension does not match the system")

    @classmethod
    def with_disturbances(cls, sys, costs, w, seed=0):
        """Task driven by explicit rows ``w_1 .. w_T`` instead of a generator."""
        w = np.array(w, dtype=float).reshape(len(costs), sys.n)
        kappa_w = max(float(np.max(np.linalg.norm(w, axis=1))), 1e-300)
        task = cls(sys, len(costs), list(costs), DisturbanceSource("zero", kappa_w, 0, sys.n), seed)
        w.setflags(write=False)
        task._w = w
        return task

    @property
    def disturbances(self):
        """Rows ``w_1 .. w_T`` (computed once)."""
        if self._w is None:
            self._w = self.disturbance.sequence(self.T)
            self._w.setflags(write=False)
        return self._w


@dataclass(frozen=True)
class OcConfig:
    eta: float
    H: int
    dom: DacDomain
    M_init: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        if not (self.eta >= 0 and np.isfinite(self.eta)):
            raise InvalidArgument(f"step size must be finite and non-negative, got {self.eta}")
        if self.H != self.dom.H:
            raise InvalidArgument("H does not match the domain")
        M = as_params(self.M_init, *self.dom.shape)
        if not self.dom.contains(M):
            raise InvalidArgument("M_init lies outside the domain")


@dataclass
class TaskRecord:
    """Everything observed while controlling one task.

    ``params[t-1]`` is ``M_t`` for ``t = 1 .. T+1``; ``states`` likewise holds
    ``x_1 .. x_{T+1}``.
    """

    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray
    costs: np.ndarray
    surrogate_costs: np.ndarray
    ideal_costs: np.ndarray
    params: np.ndarray
    K: np.ndarray
    eta: float
    seed: int = 0
    M_star: Optional[np.ndarray] = None

    @property
    def T(self):
        return self.costs.shape[0]

    @property
    def H(self):
        return self.params.shape[1]

    @property
    def total_cost(self):
        return float(np.sum(self.costs))

    @property
    def cost_approximation(self):
        """``sum_t c_t(x_t, u_t) - sum_t f_t(M_{t-H}, .., M_t)``."""
        return float(np.sum(self.costs) - np.sum(self.ideal_costs))

    def context(self, task):
        return SurrogateContext(self.K, task.sys, self.disturbances, self.H)


def default_step_size(D_scale, consts, T):
    """``D_scale / sqrt(G_f (G_f/2 + L H^2) T)``."""
    if not (D_scale > 0 and T >= 2):
        raise InvalidArgument(f"need D_scale > 0 and T >= 2, got {D_scale}, {T}")
    if not consts.G_tilde > 0:
        raise InvalidArgument("constants bundle has a non-positive G_tilde")
    return D_scale / (consts.G_tilde * math.sqrt(T))


def make_config(task, K, bounds, eta, M_init=None, H=None):
    """Convenience constructor: horizon from ``(T, gamma)`` and the matching domain."""
    H = horizon(task.T, bounds.gamma) if H is None else H
    dom = DacDomain.from_bounds(bounds, H, task.sys.m, task.sys.n)
    M_init = dom.zeros() if M_init is None else M_init
    return OcConfig(eta=eta, H=H, dom=dom, M_init=M_init, K=np.asarray(K, dtype=float))


def run_oc(task, cfg):
    """Roll out the online controller on ``task``."""
    sys, T, H = task.sys, task.T, cfg.H
    n, m = sys.n, sys.m
    K = np.atleast_2d(cfg.K)
    w_true = task.disturbances
    ctx = SurrogateContext(K, sys, np.zeros((T, n)), H)

    states = np.zeros((T + 1, n))
    inputs = np.zeros((T, m))
    costs = np.zeros(T)
    g_costs = np.zeros(T)
    params = np.zeros((T + 1, H, m, n))
    M = np.array(cfg.M_init, dtype=float)
    params[0] = M
    radii = cfg.dom.radii

    for t in range(1, T + 1):
        x = states[t - 1]
        u = control_action(K, M, x, ctx.past(t, H))
        x_next = step(sys, x, u, w_true[t - 1])
        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state norm exceeded {DIVERGENCE_LIMIT:g} at t={t}")
        ctx.record(t, recover_disturbance(sys, x, u, x_next))
        cost = task.costs[t - 1]
        costs[t - 1] = cost(x, u)
        g_costs[t - 1], grad = surrogate_value_and_grad(ctx, M, cost, t)
        if cfg.eta > 0:
            M = _project_fast(M - cfg.eta * grad, radii)
        states[t] = x_next
        inputs[t - 1] = u
        params[t] = M

    ideal = ideal_costs(ctx, params, task.costs)
    return TaskRecord(
        states=states,
        inputs=inputs,
        disturbances=ctx.w_log,
        costs=costs,
        surrogate_costs=g_costs,
        ideal_costs=ideal,
        params=params,
        K=K,
        eta=cfg.eta,
        seed=task.seed,
    )


def _project_fast(M, radii):
    norms = np.sqrt(np.einsum("kab,kab->k", M, M))
    over = norms > radii
    if over.any():
        M = M.copy()
        M[over] *= (radii[over] / norms[over])[:, None, None]
    return M


def ideal_costs(ctx, params, costs):
    """``f_t(M_{t-H}, .., M_t)`` for every t; parameters before t = 1 repeat ``M_1``.

    Vectorized over t through the window-affine form of ``s_t``;
    :func:`~metaoc.surrogate.ideal_cost_f` is the step-by-step reference.
    """
    T, H = len(costs), ctx.H
    ts = np.arange(1, T + 1)
    Wd = np.array([ctx.past(t, 2 * H) for t in ts])  # (T, 2H, n), row j-1 is w_{t-j}
    lag = np.arange(1, H + 1)
    Mwin = params[np.clip(ts[:, None] - lag[None, :] - 1, 0, None)]  # (T, H, H, m, n): M_{t-i}
    pairs = np.arange(H)[:, None] + np.arange(H)[None, :] + 1
    Wwin = Wd[:, pairs]  # (T, H, H, n): w_{t-i-k}
    s = np.einsum("ixy,tiy->tx", ctx._powers, Wd[:, :H]) + np.einsum("ixa,tikab,tikb->tx", ctx._phi, Mwin, Wwin)
    a = -s @ ctx.K.T + np.einsum("tkab,tkb->ta", params[ts - 1], Wd[:, :H])
    return np.array([costs[t](s[t], a[t]) for t in range(T)])
