"""Linear dynamical systems, bounded disturbances and strongly stable gains.

The state evolves as ``x_{t+1} = A x_t + B u_t + w_t``. A gain ``K`` is
(kappa, gamma)-strongly stable when ``A - BK = H L H^{-1}`` with
``||L|| <= 1 - gamma`` and ``||K||, ||H||, ||H^{-1}|| <= kappa`` (spectral norms).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InvalidArgument, StabilityRejected, SynthesisFailed

# relative Frobenius error allowed in A - BK = H L H^{-1}
RECONSTRUCTION_TOL = 1e-9
# eigenvector condition number above which the Schur construction is used
EIG_COND_LIMIT = 1e8
# slack for re-verifying a certificate against its own reported constants
_NORM_SLACK = 1e-12

DISTURBANCE_KINDS = ("zero", "uniform-ball", "sinusoidal", "sign-alternating", "seeded-random-walk")


def _spec_norm(X):
    X = np.atleast_2d(X)
    if X.size == 0:
        return 0.0
    return float(np.linalg.norm(X, 2))


@dataclass(frozen=True)
class SystemBounds:
    kappa_A: float = 1.0
    kappa_B: float = 1.0
    kappa_w: float = 1.0
    kappa: float = math.sqrt(2.0)
    gamma: float = 0.5
    G: float = 1.25
    beta: float = 1.25
    S: float = 1.0

    def __post_init__(self):
        for name in ("kappa_A", "kappa_B", "kappa_w", "kappa", "gamma", "G", "beta", "S"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name} must be a positive finite number, got {v!r}")
        if not self.gamma < 1:
            raise InvalidArgument(f"gamma must lie in (0, 1), got {self.gamma!r}")

    @classmethod
    def default_for(cls, n, m, **overrides):
        """Bounds used by the benchmark suite: unit system/noise bounds, kappa = sqrt(n m)."""
        kw = dict(kappa_A=1.0, kappa_B=1.0, kappa_w=1.0, kappa=math.sqrt(n * m), gamma=0.5)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    B: np.ndarray
    bounds: Optional[SystemBounds] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidArgument(f"A must be a non-empty square matrix, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise InvalidArgument(f"B must have shape ({A.shape[0]}, m>=1), got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InvalidArgument("system matrices must be finite")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.bounds is not None:
            self.check(self.bounds)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def check(self, bounds):
        tol = 1e-12
        if _spec_norm(self.A) > bounds.kappa_A + tol:
            raise InvalidArgument(f"||A|| = {_spec_norm(self.A):.6g} exceeds kappa_A = {bounds.kappa_A}")
        if _spec_norm(self.B) > bounds.kappa_B + tol:
            raise InvalidArgument(f"||B|| = {_spec_norm(self.B):.6g} exceeds kappa_B = {bounds.kappa_B}")


@dataclass(frozen=True)
class StabilityCertificate:
    K: np.ndarray
    H_mat: np.ndarray
    L_mat: np.ndarray
    kappa_achieved: float
    gamma_achieved: float
    method: str = "eig"

    def reconstruction_error(self, sys):
        closed = sys.A - sys.B @ self.K
        recon = self.H_mat @ self.L_mat @ np.linalg.inv(self.H_mat)
        return _relative_error(recon, closed)


def _relative_error(X, Y):
    scale = np.linalg.norm(Y)
    err = np.linalg.norm(X - Y)
    return float(err / scale) if scale > 0 else float(err)


def _vec(x, size, name):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != size:
        raise InvalidArgument(f"{name} has length {x.shape[0]}, expected {size}")
    return x


def step(sys, x, u, w):
    """One transition of the dynamics: ``A x + B u + w``."""
    x = _vec(x, sys.n, "x")
    u = _vec(u, sys.m, "u")
    w = _vec(w, sys.n, "w")
    return sys.A @ x + sys.B @ u + w


def riccati_gain(A, B, Q=None, R=None, tol=1e-12, max_iter=100_000):
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Returns ``(K, P)`` with ``K = (R + B'PB)^{-1} B'PA`` so that ``u = -K x``.
    """
    n, m = B.shape
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(m) if R is None else np.asarray(R, dtype=float)
    P = Q.copy()
    for it in range(max_iter):
        BtP = B.T @ P
        G = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ G
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise SynthesisFailed("Riccati iteration produced non-finite values", {"iterations": it})
        delta = np.linalg.norm(P_next - P)
        P = P_next
        if delta <= tol * max(1.0, np.linalg.norm(P)):
            break
    else:
        raise SynthesisFailed(
            "Riccati iteration did not converge", {"iterations": max_iter, "last_delta": float(delta)}
        )
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return K, P


def _eig_factorization(closed):
    vals, vecs = np.linalg.eig(closed)
    if np.iscomplexobj(vals) and np.any(np.abs(vals.imag) > 0):
        # keep conjugate pairs adjacent for the real block form
        order = np.lexsort((vals.imag, vals.real))
        vals, vecs = vals[order], vecs[:, order]
        _, V = scipy.linalg.cdf2rdf(vals, vecs)
    else:
        V = vecs.real
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIG_COND_LIMIT:
        return None
    Vinv = np.linalg.inv(V)
    scale = math.sqrt(_spec_norm(Vinv) / _spec_norm(V))
    H = V * scale
    Hinv = Vinv / scale
    L = Hinv @ closed @ H
    return H, L


def _schur_factorization(closed, kappa):
    T, Z = scipy.linalg.schur(closed, output="real")
    n = T.shape[0]
    best = (Z, T)
    best_norm = _spec_norm(T)
    # a diagonal similarity shrinks the strictly upper part of T
    for delta in np.geomspace(1.0, 1e-3, 25)[1:]:
        d = delta ** np.arange(n)
        if 1.0 / d[-1] > kappa * (1 + 1e-12):
            break
        L = (T / d[:, None]) * d[None, :]
        nrm = _spec_norm(L)
        if nrm < best_norm:
            best, best_norm = (Z * d[None, :], L), nrm
    return best


def _certify(sys, K, H, L, method, kappa, gamma):
    closed = sys.A - sys.B @ K
    Hinv = np.linalg.inv(H)
    cert = StabilityCertificate(
        K=K,
        H_mat=H,
        L_mat=L,
        kappa_achieved=max(_spec_norm(K), _spec_norm(H), _spec_norm(Hinv)),
        gamma_achieved=1.0 - _spec_norm(L),
        method=method,
    )
    err = _relative_error(H @ L @ Hinv, closed)
    if err > RECONSTRUCTION_TOL:
        return cert, f"A-BK = H L H^-1 (relative error {err:.3g})"
    checks = (
        ("||L|| <= 1-gamma", _spec_norm(L), 1.0 - gamma),
        ("||K|| <= kappa", _spec_norm(K), kappa),
        ("||H|| <= kappa", _spec_norm(H), kappa),
        ("||H^-1|| <= kappa", _spec_norm(Hinv), kappa),
    )
    for label, lhs, rhs in checks:
        if lhs > rhs + _NORM_SLACK:
            return cert, f"{label} ({lhs:.6g} > {rhs:.6g})"
    return cert, None


def verify_strong_stability(sys, K, kappa, gamma, H=None):
    """Certify that ``K`` is (kappa, gamma)-strongly stable for ``sys``.

    The factor ``H`` comes from an eigendecomposition of ``A - BK`` (real block
    form) or, for defective closed loops, a scaled real Schur form. Pass ``H``
    to force a particular similarity. Raises :class:`StabilityRejected` naming
    the first violated inequality.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (sys.m, sys.n):
        raise InvalidArgument(f"K has shape {K.shape}, expected {(sys.m, sys.n)}")
    closed = sys.A - sys.B @ K
    if H is not None:
        H = np.asarray(H, dtype=float)
        if H.shape != (sys.n, sys.n):
            raise InvalidArgument(f"H has shape {H.shape}, expected {(sys.n, sys.n)}")
        candidates = [("forced", H, np.linalg.solve(H, closed @ H))]
    else:
        candidates = []
        eig = _eig_factorization(closed)
        if eig is not None:
            candidates.append(("eig", *eig))
        candidates.append(("schur", *_schur_factorization(closed, kappa)))
    first_violation = None
    for method, Hc, Lc in candidates:
        cert, violation = _certify(sys, K, Hc, Lc, method, kappa, gamma)
        if violation is None:
            return cert
        first_violation = first_violation or violation
    raise StabilityRejected(f"gain is not ({kappa}, {gamma})-strongly stable: {first_violation}", first_violation)


def synthesize_stabilizer(sys, bounds, Q=None, R=None):
    """Riccati gain (Q = I, R = I by default) certified against ``bounds``."""
    K, P = riccati_gain(sys.A, sys.B, Q, R)
    try:
        return verify_strong_stability(sys, K, bounds.kappa, bounds.gamma)
    except StabilityRejected as exc:
        rho = float(np.max(np.abs(np.linalg.eigvals(sys.A - sys.B @ K))))
        raise SynthesisFailed(
            f"Riccati gain failed verification: {exc.violated}",
            {"K": K, "P": P, "spectral_radius": rho, "violated": exc.violated},
        ) from exc


# -- disturbances -------------------------------------------------------------

_WALK_CACHE: dict = {}


@dataclass(frozen=True)
class DisturbanceSource:
    """Deterministic bounded disturbance generator.

    Every emission depends only on ``(kind, seed, t)`` and the shape
    parameters, so a source can be replayed or queried out of order.
    """

    kind: str
    kappa_w: float
    seed: int
    n: int
    frequency: float = 0.6
    walk_step: float = 0.25

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise InvalidArgument(f"unknown disturbance kind {self.kind!r}; choose from {DISTURBANCE_KINDS}")
        if not self.kappa_w > 0:
            raise InvalidArgument("kappa_w must be positive")
        if self.n < 1:
            raise InvalidArgument("n must be >= 1")
        if int(self.seed) < 0:
            raise InvalidArgument("seed must be non-negative")

    def sequence(self, T):
        """Rows ``w_1 .. w_T``."""
        if self.kind == "seeded-random-walk":
            return _walk_path(self, T)[1 : T + 1].copy()
        return np.array([emit_disturbance(self, t) for t in range(1, T + 1)]).reshape(T, self.n)


def _walk_path(src, upto):
    key = (src.seed, src.n, src.kappa_w, src.walk_step)
    path = _WALK_CACHE.get(key)
    if path is None or path.shape[0] <= upto:
        start = 1 if path is None else path.shape[0]
        new = np.zeros((max(upto + 1, 2 * start), src.n))
        if path is not None:
            new[:start] = path
        for t in range(start, new.shape[0]):
            rng = np.random.default_rng([src.seed, t])
            w = new[t - 1] + src.walk_step * src.kappa_w * rng.standard_normal(src.n) / math.sqrt(src.n)
            nrm = np.linalg.norm(w)
            if nrm > src.kappa_w:
                w *= src.kappa_w / nrm
            new[t] = w
        new.setflags(write=False)
        _WALK_CACHE[key] = path = new
    return path


def emit_disturbance(src, t):
    """Disturbance ``w_t``; zero for ``t <= 0`` (history padding)."""
    n, kw = src.n, src.kappa_w
    if t <= 0 or src.kind == "zero":
        return np.zeros(n)
    if src.kind == "uniform-ball":
        rng = np.random.default_rng([src.seed, t])
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        radius = kw * rng.random() ** (1.0 / n)
        w = radius * direction
    elif src.kind == "sinusoidal":
        phase = np.random.default_rng([src.seed, 0]).uniform(0.0, 2 * np.pi, size=n)
        w = kw / math.sqrt(n) * np.sin(src.frequency * t + phase)
    elif src.kind == "sign-alternating":
        w = (-1.0) ** t * kw / math.sqrt(n) * np.ones(n)
    else:
        w = _walk_path(src, t)[t].copy()
    nrm = np.linalg.norm(w)
    if nrm > kw:
        w *= kw / nrm
    return w
