"""Acceptance battery: numerical oracles, invariants and trend reproduction.

Each check returns a :class:`CheckResult`; the CLI ``check`` command and the
acceptance tests both run these.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..dac import DacDomain, horizon, project
from ..lds import DisturbanceSource, SystemBounds, SystemMatrices, synthesize_stabilizer
from ..meta import HindsightObjective, compute_constants, default_zeta, hindsight_optimum, policy_regret_bound
from ..oc import TaskSpec, default_step_size, make_config, run_oc
from ..surrogate import QuadraticCost, SurrogateContext, finite_difference_grad, surrogate_cost_g, surrogate_grad
from .config import ExperimentConfig
from .experiment import replay, run_experiment, suite_constants
from .suite import generate_task_suite


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.elapsed:.1f}s) {self.detail}"


def _timed(number, name, fn):
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(number, name, bool(passed), detail, time.perf_counter() - start)


def _benchmark_task(rng, T=25, n=2, m=1):
    bounds = SystemBounds.default_for(n, m)
    A = np.eye(n) / (2 * n) + rng.random((n, n)) / (5 * n)
    B = np.full((n, m), 0.5)
    B *= min(1.0, bounds.kappa_B / np.linalg.norm(B, 2))
    sys = SystemMatrices(A, B, bounds)
    costs = [QuadraticCost(np.diag(rng.uniform(0.375, 0.625, n)), np.diag(rng.uniform(0.375, 0.625, m))) for _ in range(T)]
    src = DisturbanceSource("uniform-ball", bounds.kappa_w, int(rng.integers(2**31)), n)
    return TaskSpec(sys, T, costs, src), bounds


class Battery:
    """Runs the criteria, sharing the expensive experiments between them."""

    def __init__(self, seed=0):
        self.seed = seed
        self._fig2 = None
        self._fig3 = None

    # shared experiments

    def fig2(self):
        if self._fig2 is None:
            cfg = ExperimentConfig(n=2, m=1, N=30, T=25, seeds=list(range(10)))
            self._fig2 = run_experiment(cfg)
        return self._fig2

    def fig3(self):
        if self._fig3 is None:
            cfg = ExperimentConfig(
                n=2, m=1, N=15, T=[25, 50, 100, 200, 400], seeds=list(range(10)), methods=["independent-oc", "moc1"]
            )
            self._fig3 = run_experiment(cfg)
        return self._fig3

    # criteria

    def gradient(self):
        def run():
            rng = np.random.default_rng([self.seed, 1])
            H = 5
            worst = 0.0
            for _ in range(100):
                task, bounds = _benchmark_task(rng)
                K = synthesize_stabilizer(task.sys, bounds).K
                ctx = SurrogateContext(K, task.sys, task.disturbances, H)
                dom = DacDomain.from_bounds(bounds, H, 1, 2)
                M = dom.sample(rng)
                t = int(rng.integers(2 * H, task.T + 1))
                cost = task.costs[t - 1]
                g = surrogate_grad(ctx, M, cost, t)
                fd = finite_difference_grad(lambda Z: surrogate_cost_g(ctx, Z, cost, t), M)
                worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)))
            return worst <= 1e-6, f"max relative error {worst:.2e} (tol 1e-06)"

        res = _timed(1, "surrogate gradient vs finite differences", run)
        if res.elapsed >= 5.0:
            res.passed = False
            res.detail += f"; runtime {res.elapsed:.2f}s exceeds 5s"
        return res

    def projection(self):
        def run():
            rng = np.random.default_rng([self.seed, 2])
            tol = 1e-12
            worst_idem = worst_feas = worst_exp = 0.0
            for _ in range(1000):
                H, m, n = int(rng.integers(1, 8)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
                dom = DacDomain(H, m, n, kappa=float(rng.uniform(0.5, 2.0)), kappa_B=float(rng.uniform(0.5, 2.0)), gamma=float(rng.uniform(0.05, 0.95)))
                scale = dom.radii[:, None, None] * rng.uniform(0.0, 3.0)
                X = rng.standard_normal(dom.shape) * scale
                Y = rng.standard_normal(dom.shape) * scale
                PX, PY = project(X, dom), project(Y, dom)
                worst_idem = max(worst_idem, float(np.max(np.abs(project(PX, dom) - PX))))
                norms = np.linalg.norm(PX.reshape(H, -1), axis=1)
                worst_feas = max(worst_feas, float(np.max(norms - dom.radii)))
                worst_exp = max(worst_exp, float(np.linalg.norm(PX - PY) - np.linalg.norm(X - Y)))
            ok = worst_idem <= tol and worst_feas <= tol and worst_exp <= tol
            return ok, f"idempotence {worst_idem:.1e}, feasibility excess {worst_feas:.1e}, expansion {worst_exp:.1e}"

        return _timed(2, "projection idempotent, feasible, non-expansive", run)

    def hindsight(self):
        def run():
            # scalar instance: A = 0, B = 1, K = 0, H = 1, w = 0.5, c = (x - 1)^2 + 0.01 u^2
            bounds = SystemBounds(kappa=1.0, gamma=0.5)
            sys = SystemMatrices([[0.0]], [[1.0]], bounds)
            T = 25
            w = np.full((T, 1), 0.5)
            ctx = SurrogateContext(np.zeros((1, 1)), sys, w, 1)
            dom = DacDomain.from_bounds(bounds, 1, 1, 1)
            r1 = dom.radii[0]
            grid = np.linspace(-r1, r1, int(round(2 * r1 / 1e-4)) + 1)
            wp = np.concatenate([[0.0, 0.0], w[:, 0]])  # wp[j + 1] is w_j
            gaps = []
            # the first target puts the optimum on the ball boundary, the second inside it
            for target in (1.0, 0.7):
                cost = QuadraticCost([[1.0]], [[0.01]], x_ref=[target])
                got = float(hindsight_optimum(ctx, [cost] * T, dom).M.ravel()[0])
                F = np.zeros_like(grid)
                for t in range(1, T + 1):
                    x = wp[t] + grid * wp[t - 1]  # w_{t-1} + M w_{t-2}
                    u = grid * wp[t]
                    F += (x - target) ** 2 + 0.01 * u**2
                gaps.append(abs(got - float(grid[np.argmin(F)])))
            scalar_ok = max(gaps) <= 1e-3

            rng = np.random.default_rng([self.seed, 3])
            worst = -math.inf
            for _ in range(5):
                task, b = _benchmark_task(rng)
                K = synthesize_stabilizer(task.sys, b).K
                H = 5
                c = SurrogateContext(K, task.sys, task.disturbances, H)
                d = DacDomain.from_bounds(b, H, 1, 2)
                obj = HindsightObjective(c, task.costs)
                hs = hindsight_optimum(c, task.costs, d, objective=obj)
                for M in d.sample(rng, 100):
                    worst = max(worst, (hs.value - obj.value(M)) / (1 + abs(hs.value)))
            ok = scalar_ok and worst <= 1e-6
            return ok, f"scalar |M*-grid| = {max(gaps):.1e} (tol 1e-03); worst relative F(M*)-F(M) = {worst:.1e} (tol 1e-06)"

        return _timed(3, "hindsight solver vs grid and random feasible points", run)

    def fig2_trend(self):
        def run():
            rep = self.fig2()
            T = 25
            moc1 = rep.final_meta_regret("moc1", T)
            ind = rep.final_meta_regret("independent-oc", T)
            a = len(moc1) == 10 and len(ind) == 10 and moc1.mean() < ind.mean()
            curve = rep.curves("moc1", T).mean(axis=0)
            b = np.polyfit(np.arange(1, len(curve) + 1), curve, 1)[0] < 0
            parts = [f"(a) moc1 {moc1.mean():.4g} vs independent {ind.mean():.4g}", f"(b) moc1 slope {np.polyfit(np.arange(1, len(curve) + 1), curve, 1)[0]:.3g}"]
            c = True
            for method in ("non-adaptive", "independent-oc"):
                s = rep.curve_slopes(method, T)
                se = s.std(ddof=1) / math.sqrt(len(s))
                c = c and abs(s.mean()) <= 2 * se
                parts.append(f"{method} slope {s.mean():.2g} +- {se:.2g}")
            fast = rep.elapsed < 120
            parts.append(f"experiment {rep.elapsed:.0f}s (target 120s)")
            return a and b and c and fast and not rep.partial, "; ".join(parts)

        return _timed(4, "meta-regret decreases with N for M-OC-1, flat baselines", run)

    def fig3_trend(self):
        def run():
            rep = self.fig3()
            slope = rep.log_T_slope("independent-oc")
            moc1 = rep.final_meta_regret("moc1", 25).mean()
            ind = rep.final_meta_regret("independent-oc", 25).mean()
            ok = 0.3 <= slope <= 0.7 and moc1 < ind and rep.elapsed < 600 and not rep.partial
            return ok, f"log-log slope {slope:.3f} (want [0.3, 0.7]); T=25 moc1 {moc1:.4g} vs independent {ind:.4g}; experiment {rep.elapsed:.0f}s (target 600s)"

        return _timed(5, "regret growth in T and M-OC-1 advantage", run)

    def doubling(self):
        def run():
            reports = [r for (m, _, _), r in self.fig2().reports.items() if m == "moc2"]
            # extra runs with other starting guesses
            for eps in (0.01, 0.2):
                cfg = ExperimentConfig(N=12, T=25, seeds=[0, 1, 2], methods=["moc2"], epsilon=eps)
                reports += [r for (m, _, _), r in run_experiment(cfg).reports.items() if m == "moc2"]
            bad_ratio = bad_count = 0
            checked = 0
            for rep in reports:
                D = np.array(rep.D_trace)
                eps = D[0]
                zeta = default_zeta(rep.records[0].T)
                ratios = D[1:] / D[:-1]
                ok_ratio = np.all((D[1:] == D[:-1]) | np.isclose(ratios, zeta, rtol=4 * np.finfo(float).eps, atol=0))
                bad_ratio += not ok_ratio
                D_emp = max(rep.deviations)
                if eps < D_emp:
                    checked += 1
                    limit = math.floor(math.log(D_emp / eps) / math.log(zeta)) + 1
                    bad_count += rep.increments > limit
            ok = bad_ratio == 0 and bad_count == 0 and checked > 0
            return ok, f"{len(reports)} runs: ratio violations {bad_ratio}, count violations {bad_count} over {checked} runs with eps < D*_emp"

        return _timed(6, "M-OC-2 diameter guess doubling law", run)

    def residual(self):
        def run():
            cfg = ExperimentConfig(N=1, T=200, seeds=[0])
            tasks, _ = generate_task_suite(cfg, 0, 200)
            task = tasks[0]
            bounds = cfg.system_bounds()
            K = synthesize_stabilizer(task.sys, bounds).K
            consts = suite_constants(cfg, 200)
            vals = []
            for H in (2, 4, 8):
                eta = default_step_size(consts.D_diameter, consts, task.T)
                rec = run_oc(task, make_config(task, K, bounds, eta, H=H))
                vals.append(abs(rec.cost_approximation))
            ok = vals[0] > vals[1] > vals[2]
            return ok, "H=2,4,8 residuals " + ", ".join(f"{v:.3e}" for v in vals)

        return _timed(7, "cost-approximation residual shrinks with H", run)

    def policy_regret(self):
        def run():
            rep = self.fig2()
            bounds = rep.config.system_bounds()
            theory = compute_constants(bounds, rep.constants[25].H, rep.config.dimension)
            worst = -math.inf
            count = 0
            for (method, T, seed), r in rep.reports.items():
                for rec, M_init, eta, hs in zip(r.records, r.M_inits, r.etas, r.hindsight):
                    measured = float(np.sum(rec.surrogate_costs)) - hs.value
                    bound = policy_regret_bound(float(np.linalg.norm(hs.M - M_init)), eta, theory, T)
                    worst = max(worst, measured - bound)
                    count += 1
            return worst <= 0, f"{count} tasks, max(measured - bound) = {worst:.3g}"

        return _timed(8, "policy regret term below its bound", run)

    def gradient_bound(self):
        def run():
            rng = np.random.default_rng([self.seed, 9])
            details = []
            ok = True
            for n, m, T in ((2, 1, 25), (2, 1, 400), (3, 2, 50)):
                task, bounds = _benchmark_task(rng, T=T, n=n, m=m)
                H = horizon(T, bounds.gamma)
                consts = compute_constants(bounds, H, float(n))
                K = synthesize_stabilizer(task.sys, bounds).K
                ctx = SurrogateContext(K, task.sys, task.disturbances, H)
                dom = DacDomain.from_bounds(bounds, H, m, n)
                worst = 0.0
                for M in dom.sample(rng, 1000):
                    t = int(rng.integers(1, T + 1))
                    worst = max(worst, float(np.linalg.norm(surrogate_grad(ctx, M, task.costs[t - 1], t))))
                ok = ok and worst <= consts.G_f
                details.append(f"(n={n}, m={m}, T={T}) max {worst:.3g} <= {consts.G_f:.4g}")
            return ok, "; ".join(details)

        return _timed(9, "surrogate gradient norm within G_f", run)

    def replay(self):
        def run():
            cfg = ExperimentConfig(N=5, T=25, seeds=[0, 1])
            with tempfile.TemporaryDirectory() as tmp:
                first = Path(tmp) / "first"
                run_experiment(cfg, out_dir=first)
                _, same = replay(first, Path(tmp) / "again")
            return same, "results.csv identical" if same else "results.csv differs"

        return _timed(10, "replay of stored suites reproduces CSVs", run)

    ORDER = ("gradient", "projection", "hindsight", "fig2_trend", "fig3_trend", "doubling", "residual", "policy_regret", "gradient_bound", "replay")

    def run(self, numbers=None):
        numbers = set(numbers or range(1, 11))
        return [getattr(self, name)() for i, name in enumerate(self.ORDER, start=1) if i in numbers]


def run_checks(numbers=None, seed=0):
    return Battery(seed).run(numbers)
