"""Disturbance-action controllers.

A policy is ``u_t = -K x_t + sum_k M[k] w_{t-k}`` with ``M`` stored as an array
of shape ``(H, m, n)``; ``M[k-1]`` multiplies the disturbance ``k`` steps back.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


def horizon(T, gamma):
    """History length ``ceil(log T / log(1/(1-gamma)))``, at least 1."""
    if T < 2:
        raise InvalidArgument(f"T must be >= 2, got {T}")
    if not 0 < gamma < 1:
        raise InvalidArgument(f"gamma must lie in (0, 1), got {gamma}")
    ratio = math.log(T) / math.log(1.0 / (1.0 - gamma))
    # guard against ratios like 0.9999999999 that are integers in exact arithmetic
    H = math.ceil(ratio - 1e-12)
    return max(1, H)


def as_params(M, H=None, m=None, n=None):
    M = np.asarray(M, dtype=float)
    if M.ndim != 3:
        raise InvalidArgument(f"DAC parameters must have shape (H, m, n), got {M.shape}")
    expected = (H, m, n)
    for got, want, name in zip(M.shape, expected, "Hmn"):
        if want is not None and got != want:
            raise InvalidArgument(f"DAC parameters have shape {M.shape}, expected {expected}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgument("DAC parameters must be finite")
    return M


@dataclass(frozen=True)
class DacDomain:
    """Product of Frobenius balls, block ``k`` has radius ``kappa^3 kappa_B (1-gamma)^k``."""

    H: int
    m: int
    n: int
    kappa: float
    kappa_B: float
    gamma: float

    def __post_init__(self):
        if self.H < 1 or self.m < 1 or self.n < 1:
            raise InvalidArgument("H, m and n must be >= 1")
        if not 0 < self.gamma < 1:
            raise InvalidArgument("gamma must lie in (0, 1)")

    @classmethod
    def from_bounds(cls, bounds, H, m, n):
        return cls(H=H, m=m, n=n, kappa=bounds.kappa, kappa_B=bounds.kappa_B, gamma=bounds.gamma)

    @property
    def shape(self):
        return (self.H, self.m, self.n)

    @property
    def radii(self):
        k = np.arange(1, self.H + 1)
        return self.kappa**3 * self.kappa_B * (1.0 - self.gamma) ** k

    @property
    def diameter(self):
        return 2.0 * float(np.sqrt(np.sum(self.radii**2)))

    def zeros(self):
        return np.zeros(self.shape)

    def contains(self, M, tol=1e-12):
        M = as_params(M, *self.shape)
        norms = np.linalg.norm(M.reshape(self.H, -1), axis=1)
        return bool(np.all(norms <= self.radii * (1 + tol) + tol))

    def project(self, M):
        return project(M, self)

    def sample(self, rng, size=None):
        """Uniform draws from each block ball (independently per block)."""
        count = 1 if size is None else size
        d = self.m * self.n
        g = rng.standard_normal((count, self.H, d))
        g /= np.linalg.norm(g, axis=2, keepdims=True)
        r = self.radii[None, :] * rng.random((count, self.H)) ** (1.0 / d)
        out = (g * r[:, :, None]).reshape(count, *self.shape)
        return out[0] if size is None else out


def project(M, dom):
    """Euclidean projection onto ``dom``: each block is scaled back onto its ball."""
    M = as_params(M, *dom.shape)
    flat = M.reshape(dom.H, -1)
    norms = np.linalg.norm(flat, axis=1)
    radii = dom.radii
    scale = np.ones(dom.H)
    over = norms > radii
    scale[over] = radii[over] / norms[over]
    return (flat * scale[:, None]).reshape(dom.shape)


class DisturbanceHistory:
    """The last ``H`` disturbances, most recent first; zero before any are pushed."""

    def __init__(self, H, n):
        self.H, self.n = H, n
        self._buf = deque([np.zeros(n) for _ in range(H)], maxlen=H)

    def push(self, w):
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != self.n:
            raise InvalidArgument(f"disturbance has length {w.shape[0]}, expected {self.n}")
        self._buf.appendleft(w.copy())

    def as_array(self):
        """Shape ``(H, n)``; row ``k-1`` is ``w_{t-k}``."""
        return np.array(self._buf).reshape(self.H, self.n)

    @classmethod
    def from_array(cls, W):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        hist = cls(W.shape[0], W.shape[1])
        for w in W[::-1]:
            hist.push(w)
        return hist


def control_action(K, M, x, hist):
    """``-K x + sum_k M[k] w_{t-k}``; ``hist`` is a history or an ``(H, n)`` array."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    m, n = K.shape
    x = np.asarray(x, dtype=float).reshape(-1)
    W = hist.as_array() if isinstance(hist, DisturbanceHistory) else np.asarray(hist, dtype=float)
    M = as_params(M, None, m, n)
    if x.shape[0] != n or W.shape != (M.shape[0], n):
        raise InvalidArgument(
            f"inconsistent shapes: K {K.shape}, M {M.shape}, x {x.shape}, history {W.shape}"
        )
    return -K @ x + np.einsum("kab,kb->a", M, W)


def recover_disturbance(sys, x_t, u_t, x_next):
    """``x_{t+1} - A x_t - B u_t``."""
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    u_t = np.asarray(u_t, dtype=float).reshape(-1)
    x_next = np.asarray(x_next, dtype=float).reshape(-1)
    if x_t.shape[0] != sys.n or x_next.shape[0] != sys.n or u_t.shape[0] != sys.m:
        raise InvalidArgument("state/input shapes do not match the system")
    return x_next - sys.A @ x_t - sys.B @ u_t
