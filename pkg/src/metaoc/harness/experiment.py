"""Multi-seed runs of every method on paired suites, with CSV/JSON/SVG output."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bench import run_independent_oc, run_non_adaptive_suite
from ..dac import horizon
from ..errors import InvalidConfiguration, MetaOCError
from ..meta import (
    ConstantsBundle,
    compute_constants,
    empirical_constants,
    hindsight_optima,
    run_moc1,
    run_moc2,
    similarity_diameter,
)
from .config import METHODS, ExperimentConfig
from .suite import SuiteArtifact, generate_task_suite

log = logging.getLogger(__name__)

# calibration suites for empirical constants use seeds far from the experiment seeds
CALIBRATION_SEED = 10_000
CSV_COLUMNS = (
    "method",
    "seed",
    "task_index",
    "T",
    "task_regret",
    "cum_meta_regret",
    "D_i",
    "dist_Mstar_to_meta",
    "suite_hash",
)


def fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def suite_constants(cfg, T):
    """Constants bundle used for step sizes at horizon ``T``."""
    bounds = cfg.system_bounds()
    H = horizon(T, bounds.gamma)
    if cfg.constants == "theory":
        return compute_constants(bounds, H, cfg.dimension)
    calib = dataclasses.replace(cfg, N=cfg.calibration_tasks)
    tasks, _ = generate_task_suite(calib, CALIBRATION_SEED, T)
    return empirical_constants(tasks, bounds, H, cfg.dimension, np.random.default_rng([CALIBRATION_SEED, T]))


def constants_to_dict(c):
    return {k: getattr(c, k) for k in ("D_tilde", "G_f", "L", "D_nominal", "D_diameter", "G_tilde", "H", "d")}


def constants_from_dict(data, bounds):
    return ConstantsBundle(bounds=bounds, **{k: (int(v) if k == "H" else float(v)) for k, v in data.items()})


def run_method(method, tasks, consts, cfg, D_star=None):
    if method == "non-adaptive":
        return run_non_adaptive_suite(tasks, consts)
    if method == "independent-oc":
        rep = run_independent_oc(tasks, consts)
        rep.D_trace = [consts.D_diameter] * rep.N
        return rep
    if method == "moc1":
        return run_moc1(tasks, D_star, consts)
    if method == "moc2":
        return run_moc2(tasks, cfg.epsilon, consts, cfg.zeta)
    raise InvalidConfiguration(f"unknown method {method!r}")


def oracle_D_star(tasks, consts, floor):
    """Similarity diameter of the suite's own hindsight optima (at least ``floor``)."""
    return max(similarity_diameter(hindsight_optima(tasks, consts)), floor)


def report_rows(report, method, seed, T, digest):
    curve = report.meta_regret_curve
    dev = report.deviations
    rows = []
    for i in range(report.N):
        D_i = report.D_trace[i] if i < len(report.D_trace) else None
        rows.append(
            {
                "method": method,
                "seed": seed,
                "task_index": i,
                "T": T,
                "task_regret": float(report.regrets[i]),
                "cum_meta_regret": float(curve[i]),
                "D_i": None if D_i is None else float(D_i),
                "dist_Mstar_to_meta": float(dev[i]),
                "suite_hash": digest,
            }
        )
    return rows


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)  # (method, T, seed) -> MetaReport
    failures: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)  # T -> ConstantsBundle
    suites: dict = field(default_factory=dict)  # (T, seed) -> SuiteArtifact
    D_star: dict = field(default_factory=dict)  # (T, seed) -> value used by moc1
    elapsed: float = 0.0

    @property
    def partial(self):
        return bool(self.failures)

    def curves(self, method, T):
        """Per-seed meta-regret curves, shape ``(seeds, N)``, completed seeds only."""
        got = [self.reports[(method, T, s)].meta_regret_curve for s in self.config.seeds if (method, T, s) in self.reports]
        return np.array(got)

    def final_meta_regret(self, method, T):
        c = self.curves(method, T)
        return c[:, -1] if c.size else np.array([])

    def curve_slopes(self, method, T):
        """Least-squares slope of meta-regret against N, one per seed."""
        c = self.curves(method, T)
        if c.size == 0 or c.shape[1] < 2:
            return np.array([])
        N = np.arange(1, c.shape[1] + 1)
        return np.array([np.polyfit(N, row, 1)[0] for row in c])

    def mean_task_regret(self, method, T):
        vals = [r["task_regret"] for r in self.rows if r["method"] == method and r["T"] == T]
        return float(np.mean(vals)) if vals else math.nan

    def log_T_slope(self, method):
        Ts = self.config.T_values
        if len(Ts) < 2:
            return math.nan
        means = np.array([self.mean_task_regret(method, T) for T in Ts])
        if not np.all(means > 0):
            return math.nan
        return float(np.polyfit(np.log(Ts), np.log(means), 1)[0])

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary(self):
        out = {"config": self.config.to_dict(), "partial": self.partial, "failures": self.failures, "by_T": {}}
        for T in self.config.T_values:
            entry = {"constants": constants_to_dict(self.constants[T]) if T in self.constants else None, "methods": {}}
            for method in self.config.methods:
                final = self.final_meta_regret(method, T)
                slopes = self.curve_slopes(method, T)
                curves = self.curves(method, T)
                entry["methods"][method] = {
                    "seeds_completed": int(len(final)),
                    "meta_regret_mean": _mean(final),
                    "meta_regret_se": _se(final),
                    "curve_mean": curves.mean(axis=0).tolist() if curves.size else [],
                    "curve_se": [_se(col) for col in curves.T] if curves.size else [],
                    "slope_vs_N_mean": _mean(slopes),
                    "slope_vs_N_se": _se(slopes),
                    "mean_task_regret": _nan_to_none(self.mean_task_regret(method, T)),
                }
            out["by_T"][str(T)] = entry
        out["log_T_slope"] = {m: _nan_to_none(self.log_T_slope(m)) for m in self.config.methods}
        return out

    def write(self, out_dir):
        out = Path(out_dir)
        (out / "suites").mkdir(parents=True, exist_ok=True)
        self.config.dump(out / "config.yaml")
        for (T, seed), art in sorted(self.suites.items()):
            art.save(out / "suites" / f"seed{seed}_T{T}.json")
        consts = {str(T): constants_to_dict(c) for T, c in sorted(self.constants.items())}
        (out / "constants.json").write_text(json.dumps(consts, indent=1, sort_keys=True))
        (out / "results.csv").write_text(self.csv_text())
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=1, sort_keys=True))
        render_charts(self, out)
        return out


def _mean(x):
    return float(np.mean(x)) if len(x) else None


def _se(x):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return None
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _nan_to_none(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def run_experiment(cfg, suites=None, constants=None, out_dir=None):
    """Run every enabled method on paired suites for each ``(T, seed)``.

    ``suites`` maps ``(T, seed)`` to a stored :class:`SuiteArtifact` and
    ``constants`` maps ``T`` to a stored bundle; missing entries are generated.
    A failure inside a method aborts that method for that seed only and is
    recorded in the report.
    """
    start = time.perf_counter()
    report = ExperimentReport(config=cfg)
    for T in cfg.T_values:
        consts = (constants or {}).get(T) or suite_constants(cfg, T)
        report.constants[T] = consts
        for seed in cfg.seeds:
            art = (suites or {}).get((T, seed))
            if art is None:
                tasks, art = generate_task_suite(cfg, seed, T)
            else:
                tasks = art.tasks()
            report.suites[(T, seed)] = art
            digest = art.digest
            D_star = cfg.D_star
            for method in (m for m in METHODS if m in cfg.methods):
                try:
                    if method == "moc1" and D_star is None:
                        D_star = oracle_D_star(tasks, consts, cfg.epsilon)
                        report.D_star[(T, seed)] = D_star
                    rep = run_method(method, tasks, consts, cfg, D_star)
                except (MetaOCError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    log.warning("method %s failed on seed %d (T=%d): %s", method, seed, T, exc)
                    report.failures.append({"method": method, "seed": seed, "T": T, "error": f"{type(exc).__name__}: {exc}"})
                    continue
                report.reports[(method, T, seed)] = rep
                report.rows.extend(report_rows(rep, method, seed, T, digest))
    report.elapsed = time.perf_counter() - start
    if out_dir is not None:
        report.write(out_dir)
    return report


def load_stored(out_dir):
    """Config, suites and constants written by :meth:`ExperimentReport.write`."""
    out = Path(out_dir)
    cfg = ExperimentConfig.load(out / "config.yaml")
    suites = {}
    for T in cfg.T_values:
        for seed in cfg.seeds:
            path = out / "suites" / f"seed{seed}_T{T}.json"
            if not path.exists():
                raise InvalidConfiguration(f"missing stored suite {path}")
            suites[(T, seed)] = SuiteArtifact.load(path)
    try:
        raw = json.loads((out / "constants.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfiguration(f"cannot read stored constants: {exc}") from exc
    bounds = cfg.system_bounds()
    constants = {int(T): constants_from_dict(v, bounds) for T, v in raw.items()}
    return cfg, suites, constants


def replay(stored_dir, out_dir):
    """Rerun a stored experiment into ``out_dir``; returns ``(report, identical_csv)``."""
    cfg, suites, constants = load_stored(stored_dir)
    report = run_experiment(cfg, suites=suites, constants=constants, out_dir=out_dir)
    same = (Path(stored_dir) / "results.csv").read_bytes() == (Path(out_dir) / "results.csv").read_bytes()
    return report, same


def render_charts(report, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "metaoc"
    cfg = report.config
    T0 = cfg.T_values[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in cfg.methods:
        c = report.curves(method, T0)
        if not c.size:
            continue
        N = np.arange(1, c.shape[1] + 1)
        mean = c.mean(axis=0)
        se = c.std(axis=0, ddof=1) / math.sqrt(len(c)) if len(c) > 1 else np.zeros_like(mean)
        ax.plot(N, mean, label=method)
        ax.fill_between(N, mean - se, mean + se, alpha=0.2)
    ax.set_xlabel("number of tasks N")
    ax.set_ylabel("meta-regret")
    ax.set_title(f"T = {T0}")
    if ax.lines:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out / "meta_regret_vs_N.svg", metadata={"Date": None})
    plt.close(fig)

    if len(cfg.T_values) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for method in cfg.methods:
            ys = [_mean(report.final_meta_regret(method, T)) for T in cfg.T_values]
            if all(y is not None for y in ys):
                ax.plot(cfg.T_values, ys, marker="o", label=method)
        ax.set_xscale("log")
        ax.set_xlabel("horizon T")
        ax.set_ylabel(f"meta-regret at N = {cfg.N}")
        if ax.lines:
            ax.legend()
        fig.tight_layout()
        fig.savefig(out / "meta_regret_vs_T.svg", metadata={"Date": None})
        plt.close(fig)
