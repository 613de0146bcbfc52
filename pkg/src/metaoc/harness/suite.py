"""Benchmark task suites: perturbed dynamics around a nominal matrix, random diagonal costs."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidConfiguration
from ..lds import DisturbanceSource, SystemBounds, SystemMatrices
from ..oc import TaskSpec
from ..surrogate import QuadraticCost

COST_RANGE = (0.375, 0.625)
SUITE_FORMAT = 1


def nominal_dynamics(rng, n):
    """``I/(2n) + W/(5n)`` with ``W`` uniform on ``[0, 1]`` entrywise."""
    return np.eye(n) / (2 * n) + rng.random((n, n)) / (5 * n)


def input_matrix(rng, n, m, rule, kappa_B):
    if rule == "fixed":
        B = np.full((n, m), 0.5)
    elif rule == "uniform":
        B = rng.random((n, m))
    else:
        raise InvalidConfiguration(f"unknown B rule {rule!r}")
    nrm = np.linalg.norm(B, 2)
    if nrm > kappa_B:
        B = B * (kappa_B / nrm)
    return B


@dataclass
class SuiteArtifact:
    """Everything needed to rebuild a suite exactly.

    ``Q`` and ``R`` hold the cost diagonals with shapes ``(N, T, n)`` and
    ``(N, T, m)``.
    """

    seed: int
    T: int
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    disturbance: str
    disturbance_seeds: list
    kappa_w: float
    frequency: float
    bounds: dict

    @property
    def N(self):
        return self.A.shape[0]

    def to_dict(self):
        return {
            "format": SUITE_FORMAT,
            "seed": self.seed,
            "T": self.T,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
            "disturbance": self.disturbance,
            "disturbance_seeds": list(self.disturbance_seeds),
            "kappa_w": self.kappa_w,
            "frequency": self.frequency,
            "bounds": dict(self.bounds),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != SUITE_FORMAT:
            raise InvalidConfiguration(f"unsupported suite format {data.get('format')!r}")
        try:
            return cls(
                seed=int(data["seed"]),
                T=int(data["T"]),
                A=np.array(data["A"], dtype=float),
                B=np.array(data["B"], dtype=float),
                Q=np.array(data["Q"], dtype=float),
                R=np.array(data["R"], dtype=float),
                disturbance=data["disturbance"],
                disturbance_seeds=[int(s) for s in data["disturbance_seeds"]],
                kappa_w=float(data["kappa_w"]),
                frequency=float(data["frequency"]),
                bounds=dict(data["bounds"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfiguration(f"malformed suite file: {exc}") from exc

    def canonical_json(self):
        # repr-based float output round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def save(self, path):
        Path(path).write_text(self.canonical_json())

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfiguration(f"cannot read suite {path}: {exc}") from exc
        return cls.from_dict(data)

    def system_bounds(self):
        return SystemBounds(**self.bounds)

    def tasks(self):
        bounds = self.system_bounds()
        n = self.A.shape[1]
        out = []
        for i in range(self.N):
            sys = SystemMatrices(self.A[i], self.B[i], bounds)
            costs = [QuadraticCost(np.diag(q), np.diag(r)) for q, r in zip(self.Q[i], self.R[i])]
            src = DisturbanceSource(self.disturbance, self.kappa_w, self.disturbance_seeds[i], n, frequency=self.frequency)
            out.append(TaskSpec(sys, self.T, costs, src, seed=self.disturbance_seeds[i]))
        return out


def generate_task_suite(cfg, seed, T=None):
    """Build ``cfg.N`` tasks from ``seed``; returns ``(tasks, artifact)``.

    Task ``i`` draws from its own stream ``(seed, i)``: dynamics and input
    matrix first, then per-step cost diagonals, so the systems of a suite do
    not depend on ``T``.
    """
    T = cfg.T_values[0] if T is None else T
    bounds = cfg.system_bounds()
    n, m, N = cfg.n, cfg.m, cfg.N
    A = np.zeros((N, n, n))
    B = np.zeros((N, n, m))
    Q = np.zeros((N, T, n))
    R = np.zeros((N, T, m))
    lo, hi = COST_RANGE
    for i in range(N):
        rng = np.random.default_rng([seed, i])
        A[i] = nominal_dynamics(rng, n)
        B[i] = input_matrix(rng, n, m, cfg.B_rule, bounds.kappa_B)
        Q[i] = rng.uniform(lo, hi, size=(T, n))
        R[i] = rng.uniform(lo, hi, size=(T, m))
    if cfg.shared_disturbance:
        dseeds = [seed] * N
    else:
        dseeds = [int(s) for s in np.random.default_rng([seed, N, 1]).integers(0, 2**31, size=N)]
    art = SuiteArtifact(
        seed=seed,
        T=T,
        A=A,
        B=B,
        Q=Q,
        R=R,
        disturbance=cfg.disturbance,
        disturbance_seeds=dseeds,
        kappa_w=bounds.kappa_w,
        frequency=cfg.frequency,
        bounds={k: getattr(bounds, k) for k in ("kappa_A", "kappa_B", "kappa_w", "kappa", "gamma", "G", "beta", "S")},
    )
    return art.tasks(), art
