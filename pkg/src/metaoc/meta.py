"""Learning the inner-loop initialization across a sequence of tasks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

from .bench import meta_regret, task_regret
from .dac import DacDomain, as_params, project
from .errors import InvalidArgument, InvalidConfiguration, SynthesisFailed
from .lds import synthesize_stabilizer
from .oc import OcConfig, default_step_size, run_oc
from .surrogate import QuadraticCost, SurrogateContext, ideal_cost_f, stacked_affine_maps, surrogate_grad

log = logging.getLogger(__name__)

HINDSIGHT_MAX_ITER = 5000
HINDSIGHT_TOL = 1e-6


@dataclass(frozen=True)
class ConstantsBundle:
    """Regret-bound constants for one configuration of bounds and history length."""

    D_tilde: float
    G_f: float
    L: float
    D_nominal: float
    D_diameter: float
    G_tilde: float
    H: int
    d: float
    bounds: object

    @property
    def G_tilde_sq(self):
        return self.G_f * (self.G_f / 2 + self.L * self.H**2)


def compute_constants(bounds, H, d):
    b = bounds
    if H < 1 or not d > 0:
        raise InvalidArgument("need H >= 1 and d > 0")
    denom = 1.0 - b.kappa**2 * (1.0 - b.gamma) ** (H + 1)
    if denom <= 0:
        raise InvalidConfiguration(
            f"kappa^2 (1-gamma)^(H+1) = {1 - denom:.6g} >= 1; the state bound is undefined"
        )
    k3 = b.kappa**3
    D_tilde = b.kappa_w * (b.kappa**2 + H * b.kappa_B**2 * b.kappa**5) / (b.gamma * denom) + (
        b.kappa_B * k3 * b.kappa_w / b.gamma
    )
    G_f = b.G * D_tilde * b.kappa_w * H * d * (2 * b.kappa_B * k3 / b.gamma + H)
    L = 2 * b.G * D_tilde * b.kappa_w * b.kappa_B * k3
    radii = k3 * b.kappa_B * (1.0 - b.gamma) ** np.arange(1, H + 1)
    return ConstantsBundle(
        D_tilde=D_tilde,
        G_f=G_f,
        L=L,
        D_nominal=b.kappa_B * k3 * math.sqrt(d) / b.gamma,
        D_diameter=2.0 * float(np.sqrt(np.sum(radii**2))),
        G_tilde=math.sqrt(G_f * (G_f / 2 + L * H**2)),
        H=H,
        d=d,
        bounds=bounds,
    )


def empirical_constants(tasks, bounds, H, d, rng, samples=64):
    """Constants bundle with ``G_f`` and ``L`` measured instead of bounded.

    ``G_f`` becomes the largest sampled ``||grad g_t(M)||`` over feasible ``M``;
    ``L`` the largest ratio ``|f_t(W) - f_t(W')| / ||M - M'||`` where ``W'``
    differs from ``W`` in one window entry. Everything else keeps its closed
    form. Intended for a calibration suite that is disjoint from the tasks
    being scored.
    """
    theory = compute_constants(bounds, H, d)
    G_f, L = 0.0, 0.0
    for index, task in enumerate(tasks):
        K = _stabilize(task, bounds, index).K
        dom = DacDomain.from_bounds(bounds, H, task.sys.m, task.sys.n)
        ctx = SurrogateContext(K, task.sys, task.disturbances, H)
        ts = rng.integers(1, task.T + 1, size=samples)
        for t, M in zip(ts, dom.sample(rng, samples)):
            cost = task.costs[t - 1]
            G_f = max(G_f, float(np.linalg.norm(surrogate_grad(ctx, M, cost, t))))
            W = dom.sample(rng, H + 1)
            j = rng.integers(H + 1)
            W2 = W.copy()
            W2[j] = dom.sample(rng)
            gap = float(np.linalg.norm(W[j] - W2[j]))
            if gap > 0:
                df = abs(ideal_cost_f(ctx, W, cost, t) - ideal_cost_f(ctx, W2, cost, t))
                L = max(L, df / gap)
    if not (G_f > 0 and L > 0):
        raise InvalidConfiguration("calibration tasks produced zero gradients; cannot measure constants")
    return replace(theory, G_f=G_f, L=L, G_tilde=math.sqrt(G_f * (G_f / 2 + L * H**2)))


def cost_approximation_bound(consts, T):
    """Upper bound on ``sum c_t - sum f_t`` for one task."""
    b, H, Dt = consts.bounds, consts.H, consts.D_tilde
    k3 = b.kappa**3
    return 2 * T * b.G * Dt * (1 - b.gamma) ** (H + 1) * (b.kappa_w * H * b.kappa_B**2 * k3 / b.gamma + Dt * k3)


def policy_regret_bound(dist0, eta, consts, T):
    """``||M* - M_1||^2/(2 eta) + T G_f^2 eta/2 + eta L H^2 G_f T``."""
    if eta <= 0:
        return math.inf
    G_f, L, H = consts.G_f, consts.L, consts.H
    return dist0**2 / (2 * eta) + T * G_f**2 * eta / 2 + eta * L * H**2 * G_f * T


# -- hindsight optimum --------------------------------------------------------


class HindsightObjective:
    """``F(M) = sum_t g_t(M)`` over a finished task.

    Quadratic cost sequences are collapsed to ``1/2 m'Pm + q'm + r``; other
    costs are evaluated term by term.
    """

    def __init__(self, ctx, costs):
        self.ctx = ctx
        self.costs = list(costs)
        self.shape = ctx.shape
        self.S0, self.JS, self.A0, self.JA = stacked_affine_maps(ctx, len(self.costs))
        self.quadratic = all(isinstance(c, QuadraticCost) for c in self.costs)
        if self.quadratic:
            p = self.JS.shape[2]
            P = np.zeros((p, p))
            q = np.zeros(p)
            r = 0.0
            for c, s0, Js, a0, Ja in zip(self.costs, self.S0, self.JS, self.A0, self.JA):
                Qs, Rs = c.Q + c.Q.T, c.R + c.R.T
                ds = s0 - c.x_ref
                P += Js.T @ Qs @ Js + Ja.T @ Rs @ Ja
                q += Js.T @ Qs @ ds + Ja.T @ Rs @ a0
                r += c(s0, a0)
            self.P, self.q, self.r = 0.5 * (P + P.T), q, r

    def value(self, M):
        m = np.asarray(M, dtype=float).reshape(-1)
        if self.quadratic:
            return float(0.5 * m @ self.P @ m + self.q @ m + self.r)
        return float(sum(c(s0 + Js @ m, a0 + Ja @ m) for c, s0, Js, a0, Ja in self._terms()))

    def grad(self, M):
        m = np.asarray(M, dtype=float).reshape(-1)
        if self.quadratic:
            return (self.P @ m + self.q).reshape(self.shape)
        g = np.zeros(m.shape)
        for c, s0, Js, a0, Ja in self._terms():
            gx, gu = c.gradients(s0 + Js @ m, a0 + Ja @ m)
            g += Js.T @ gx + Ja.T @ gu
        return g.reshape(self.shape)

    def smoothness(self):
        if self.quadratic:
            return float(np.linalg.eigvalsh(self.P)[-1]) if self.P.size else 0.0
        return None

    def _terms(self):
        return zip(self.costs, self.S0, self.JS, self.A0, self.JA)


@dataclass
class HindsightResult:
    M: np.ndarray
    value: float
    stationarity: float
    iterations: int
    converged: bool


def gradient_mapping_norm(objective, M, dom, step):
    return float(np.linalg.norm(M - project(M - step * objective.grad(M), dom)) / step)


def hindsight_optimum(ctx, costs, dom, max_iter=HINDSIGHT_MAX_ITER, tol=HINDSIGHT_TOL, objective=None):
    """Minimize ``sum_t g_t`` over the domain, starting from zero.

    Convergence is declared when the gradient mapping
    ``||M - Proj(M - delta grad F(M))|| / delta`` drops to ``tol``; otherwise
    the last iterate is returned with ``converged=False``. Quadratic objectives
    try SQP with the block-ball constraints first (the summed quadratic is often
    nearly singular, where first-order methods crawl) and fall back to
    accelerated projected gradient with restarts.
    """
    obj = objective or HindsightObjective(ctx, costs)
    M = dom.zeros()
    lip = obj.smoothness()
    if lip is not None and lip <= 0:
        return HindsightResult(M, obj.value(M), 0.0, 0, True)
    if lip is None:
        return _pgd_backtracking(obj, M, dom, max_iter, tol)
    step = 1.0 / lip
    sqp_iters = 0
    cand, sqp_iters = _sqp(obj, dom)
    if cand is not None:
        gmap = gradient_mapping_norm(obj, cand, dom, step)
        if gmap <= tol:
            return HindsightResult(cand, obj.value(cand), gmap, sqp_iters, True)
        if obj.value(cand) < obj.value(M):
            M = cand
    value = obj.value(M)
    y, momentum = M, 1.0
    gmap = math.inf
    for it in range(1, max_iter + 1):
        g_M = obj.grad(M)
        gmap = float(np.linalg.norm(M - project(M - step * g_M, dom)) / step)
        if gmap <= tol:
            return HindsightResult(M, value, gmap, sqp_iters + it, True)
        cand = project(y - step * obj.grad(y), dom)
        cand_value = obj.value(cand)
        if cand_value > value:
            # function-value restart: drop the momentum and take a plain step from M
            y, momentum = M, 1.0
            cand = project(M - step * g_M, dom)
            cand_value = obj.value(cand)
        nxt = (1 + math.sqrt(1 + 4 * momentum**2)) / 2
        y = cand + ((momentum - 1) / nxt) * (cand - M)
        M, value, momentum = cand, cand_value, nxt
    log.warning("hindsight solver stopped after %d iterations (gradient mapping %.3g)", max_iter, gmap)
    return HindsightResult(M, value, gmap, sqp_iters + max_iter, False)


def _sqp(obj, dom):
    """SLSQP on the collapsed quadratic from zero; ``(None, iters)`` if it fails."""
    blk = dom.m * dom.n
    radii = dom.radii
    p = dom.H * blk

    def ball(k):
        sl = slice(k * blk, (k + 1) * blk)

        def fun(z):
            return radii[k] ** 2 - z[sl] @ z[sl]

        def jac(z):
            g = np.zeros(p)
            g[sl] = -2 * z[sl]
            return g

        return {"type": "ineq", "fun": fun, "jac": jac}

    res = minimize(
        lambda z: 0.5 * z @ obj.P @ z + obj.q @ z,
        np.zeros(p),
        jac=lambda z: obj.P @ z + obj.q,
        constraints=[ball(k) for k in range(dom.H)],
        method="SLSQP",
        options={"ftol": 1e-16, "maxiter": 500},
    )
    if not np.all(np.isfinite(res.x)):
        return None, int(res.nit)
    return project(res.x.reshape(dom.shape), dom), int(res.nit)


def _pgd_backtracking(obj, M, dom, max_iter, tol):
    step = 1.0 / max(1.0, float(np.linalg.norm(obj.grad(M))))
    value = obj.value(M)
    gmap = math.inf
    for it in range(1, max_iter + 1):
        g = obj.grad(M)
        while True:
            cand = project(M - step * g, dom)
            cand_value = obj.value(cand)
            diff = cand - M
            if cand_value <= value + np.sum(g * diff) + np.sum(diff**2) / (2 * step) + 1e-15:
                break
            step *= 0.5
        gmap = float(np.linalg.norm(M - cand) / step)
        if gmap <= tol:
            return HindsightResult(M, value, gmap, it, True)
        M, value = cand, cand_value
    log.warning("hindsight solver stopped after %d iterations (gradient mapping %.3g)", max_iter, gmap)
    return HindsightResult(M, value, gmap, max_iter, False)


# -- meta update --------------------------------------------------------------


def meta_loss_grad(M_meta, M_star):
    """Gradient of ``1/2 ||M_meta - M_star||^2``."""
    M_meta = as_params(M_meta)
    M_star = as_params(M_star)
    if M_meta.shape != M_star.shape:
        raise InvalidArgument(f"shape mismatch {M_meta.shape} vs {M_star.shape}")
    return M_meta - M_star


@dataclass(frozen=True)
class MetaState:
    M_meta: np.ndarray
    i: int = 1
    star_sum: Optional[np.ndarray] = None
    D_i: Optional[float] = None
    k: int = 0
    eps: Optional[float] = None
    zeta: Optional[float] = None


def meta_update(state, M_star, dom):
    """Online gradient step with rate ``1/i`` on the meta loss, then project."""
    if state.i < 1:
        raise InvalidArgument("task counter must be >= 1")
    M_next = project(state.M_meta - meta_loss_grad(state.M_meta, M_star) / state.i, dom)
    star_sum = M_star if state.star_sum is None else state.star_sum + M_star
    return replace(state, M_meta=M_next, i=state.i + 1, star_sum=star_sum)


def default_zeta(T):
    return (1.0 + math.log(T)) / math.log(T)


# -- reports ------------------------------------------------------------------


def ritter_diameter(points):
    """Diameter of Ritter's approximate smallest enclosing ball."""
    P = np.asarray(points, dtype=float).reshape(len(points), -1)
    if len(P) < 2:
        return 0.0
    y = P[np.argmax(np.linalg.norm(P - P[0], axis=1))]
    z = P[np.argmax(np.linalg.norm(P - y, axis=1))]
    center = (y + z) / 2
    radius = np.linalg.norm(y - z) / 2
    for p in P:
        dist = np.linalg.norm(p - center)
        if dist > radius:
            new_radius = (radius + dist) / 2
            center = center + (dist - new_radius) / dist * (p - center)
            radius = new_radius
    return float(2 * radius)


def deviation_statistic(M_stars):
    """Root-mean-square distance of the hindsight optima from their mean."""
    S = np.asarray(M_stars, dtype=float).reshape(len(M_stars), -1)
    return float(np.sqrt(np.mean(np.sum((S - S.mean(axis=0)) ** 2, axis=1))))


@dataclass
class MetaReport:
    method: str
    regrets: List[float]
    records: list
    M_stars: List[np.ndarray]
    M_inits: List[np.ndarray]
    etas: List[float]
    D_trace: List[float] = field(default_factory=list)
    increments: int = 0
    hindsight: list = field(default_factory=list)

    @property
    def N(self):
        return len(self.regrets)

    @property
    def meta_regret(self):
        return meta_regret(self.regrets)

    @property
    def meta_regret_curve(self):
        """Meta-regret after each task, i.e. running mean of task regrets."""
        r = np.asarray(self.regrets, dtype=float)
        return np.cumsum(r) / np.arange(1, len(r) + 1)

    @property
    def deviations(self):
        """``||M*_i - M_init_i||`` per task."""
        return [float(np.linalg.norm(s - m)) for s, m in zip(self.M_stars, self.M_inits)]

    @property
    def D_bar(self):
        return deviation_statistic(self.M_stars)

    @property
    def D_star_pairwise(self):
        return similarity_diameter(self.M_stars)

    @property
    def D_star_ritter(self):
        return ritter_diameter(self.M_stars)

    @property
    def cost_approximation(self):
        return [r.cost_approximation for r in self.records]


def meta_regret_bound(report, consts, T, D_star, C=1.0):
    """One-sided bound ``(C log N/(D* N) + D_bar/2 + D*) sqrt(G~^2 T)`` plus the measured cost-approximation residual."""
    N = report.N
    lead = C * math.log(N) / (D_star * N) + report.D_bar / 2 + D_star
    residual = float(np.mean(np.abs(report.cost_approximation)))
    return lead * math.sqrt(consts.G_tilde_sq * T) + residual


# -- meta-learners ------------------------------------------------------------


def _stabilize(task, bounds, index):
    try:
        return synthesize_stabilizer(task.sys, bounds)
    except SynthesisFailed as exc:
        exc.diagnostics["task_index"] = index
        raise SynthesisFailed(f"task {index}: {exc}", exc.diagnostics) from exc


def solve_task(task, consts, eta, M_init, index=0, K=None):
    """Run the inner online controller, then its hindsight optimum and regret.

    Returns ``(record, hindsight_result, regret)``.
    """
    bounds = consts.bounds
    if K is None:
        K = _stabilize(task, bounds, index).K
    dom = DacDomain.from_bounds(bounds, consts.H, task.sys.m, task.sys.n)
    rec = run_oc(task, OcConfig(eta=eta, H=consts.H, dom=dom, M_init=M_init, K=K))
    hs = hindsight_optimum(rec.context(task), task.costs, dom)
    rec.M_star = hs.M
    regret = task_regret(rec, task)
    return rec, hs, regret


def _domain(tasks, consts):
    if not tasks:
        raise InvalidArgument("need at least one task")
    sys0 = tasks[0].sys
    return DacDomain.from_bounds(consts.bounds, consts.H, sys0.m, sys0.n)


def run_moc1(tasks, D_star, consts):
    """Meta-learning with a known similarity diameter ``D_star``."""
    if not D_star > 0:
        raise InvalidArgument("D_star must be positive")
    dom = _domain(tasks, consts)
    state = MetaState(M_meta=dom.zeros())
    report = MetaReport("moc1", [], [], [], [], [])
    for index, task in enumerate(tasks):
        eta = default_step_size(D_star, consts, task.T)
        M_init = state.M_meta
        rec, hs, regret = solve_task(task, consts, eta, M_init, index)
        state = meta_update(state, hs.M, dom)
        _append(report, rec, hs, regret, M_init, eta)
        report.D_trace.append(D_star)
    return report


def run_moc2(tasks, eps, consts, zeta=None):
    """Meta-learning that grows its diameter guess geometrically from ``eps``."""
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    dom = _domain(tasks, consts)
    zeta = default_zeta(tasks[0].T) if zeta is None else zeta
    if not zeta > 1:
        raise InvalidArgument("zeta must exceed 1")
    state = MetaState(M_meta=dom.zeros(), D_i=eps, k=0, eps=eps, zeta=zeta)
    report = MetaReport("moc2", [], [], [], [], [])
    for index, task in enumerate(tasks):
        eta = default_step_size(state.D_i, consts, task.T)
        rec, hs, regret = solve_task(task, consts, eta, state.M_meta, index)
        _append(report, rec, hs, regret, state.M_meta, eta)
        report.D_trace.append(state.D_i)
        state = moc2_step(state, hs.M)
    report.increments = state.k
    return report


def moc2_step(state, M_star):
    """Running-mean initialization plus the diameter-guess schedule.

    The guess grows by ``zeta`` when ``M_star`` lands farther than ``D_i`` from
    the initialization it was learned from (never on the first task).
    """
    i = state.i
    star_sum = M_star if state.star_sum is None else state.star_sum + M_star
    k = state.k
    if i > 1 and np.linalg.norm(M_star - state.M_meta) > state.D_i:
        k += 1
    return replace(state, M_meta=star_sum / i, i=i + 1, star_sum=star_sum, k=k, D_i=state.zeta**k * state.eps)


def _append(report, rec, hs, regret, M_init, eta):
    report.records.append(rec)
    report.hindsight.append(hs)
    report.regrets.append(regret)
    report.M_stars.append(hs.M)
    report.M_inits.append(np.array(M_init))
    report.etas.append(eta)


def hindsight_optima(tasks, consts):
    """``M*_i`` for each task computed directly from its disturbance stream.

    The recovered disturbances of any rollout equal the true ones, so these
    optima do not depend on the controller that will later run the task.
    """
    out = []
    for index, task in enumerate(tasks):
        K = _stabilize(task, consts.bounds, index).K
        dom = DacDomain.from_bounds(consts.bounds, consts.H, task.sys.m, task.sys.n)
        ctx = SurrogateContext(K, task.sys, task.disturbances, consts.H)
        out.append(hindsight_optimum(ctx, task.costs, dom).M)
    return out


def similarity_diameter(M_stars):
    """Largest pairwise distance among hindsight optima."""
    if len(M_stars) < 2:
        return 0.0
    return float(np.max(pdist(np.asarray(M_stars).reshape(len(M_stars), -1))))
