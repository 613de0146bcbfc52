"""Idealized state/action, the truncated costs f_t and g_t, and their gradients.

The idealized state ``s_t`` replays the last ``H`` policy parameters from a
zero state at time ``t - H`` using the logged disturbances. Both ``s_t`` and the
idealized action ``a_t`` are affine in the parameters, so with a constant
window

    s_t = s0 + Js @ vec(M),    a_t = a0 + Ja @ vec(M)

and the gradient of ``g_t(M) = c_t(s_t, a_t)`` is ``Js' grad_x c + Ja' grad_u c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dac import as_params
from .errors import InvalidArgument, NumericFailure

FD_STEP = 1e-5


class CostFunction:
    """Convex per-step cost ``c(x, u)``.

    Gradients fall back to central finite differences when not supplied.
    """

    def __init__(self, fn, grad_x=None, grad_u=None):
        self._fn = fn
        self._grad_x = grad_x
        self._grad_u = grad_u

    def __call__(self, x, u):
        return float(self._fn(x, u))

    @property
    def analytic(self):
        return self._grad_x is not None and self._grad_u is not None

    def gradients(self, x, u):
        if self.analytic:
            return np.asarray(self._grad_x(x, u), dtype=float), np.asarray(self._grad_u(x, u), dtype=float)
        gx = _central_diff(lambda z: self._fn(z, u), np.asarray(x, dtype=float))
        gu = _central_diff(lambda z: self._fn(x, z), np.asarray(u, dtype=float))
        return gx, gu


class QuadraticCost(CostFunction):
    """``(x - x_ref)' Q (x - x_ref) + u' R u``."""

    def __init__(self, Q, R, x_ref=None):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        n = self.Q.shape[0]
        self.x_ref = np.zeros(n) if x_ref is None else np.asarray(x_ref, dtype=float).reshape(n)
        Qs = self.Q + self.Q.T
        Rs = self.R + self.R.T
        super().__init__(
            lambda x, u: (x - self.x_ref) @ self.Q @ (x - self.x_ref) + u @ self.R @ u,
            lambda x, u: Qs @ (x - self.x_ref),
            lambda x, u: Rs @ u,
        )


def constant_cost(value, n, m):
    return CostFunction(lambda x, u: value, lambda x, u: np.zeros(n), lambda x, u: np.zeros(m))


def _central_diff(fun, z, step=FD_STEP):
    h = step * max(1.0, float(np.max(np.abs(z))) if z.size else 1.0)
    g = np.zeros_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e.flat[i] = h
        g.flat[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def finite_difference_grad(fun, M, step=FD_STEP):
    """Central-difference gradient of a scalar function of the parameter array."""
    return _central_diff(fun, np.asarray(M, dtype=float), step)


@dataclass
class SurrogateContext:
    """Gain, system, disturbance log and history length for one task.

    ``w_log[t-1]`` holds ``w_t``; indices outside the log read as zero.
    """

    K: np.ndarray
    sys: object
    w_log: np.ndarray
    H: int
    _powers: np.ndarray = field(init=False, repr=False)
    _phi: np.ndarray = field(init=False, repr=False)
    _padded: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.w_log = np.atleast_2d(np.asarray(self.w_log, dtype=float)).reshape(-1, self.sys.n)
        if self.K.shape != (self.sys.m, self.sys.n):
            raise InvalidArgument(f"K has shape {self.K.shape}, expected {(self.sys.m, self.sys.n)}")
        if self.H < 1:
            raise InvalidArgument("H must be >= 1")
        closed = self.sys.A - self.sys.B @ self.K
        powers = np.empty((self.H, self.sys.n, self.sys.n))
        powers[0] = np.eye(self.sys.n)
        for i in range(1, self.H):
            powers[i] = closed @ powers[i - 1]
        self._powers = powers
        self._phi = powers @ self.sys.B
        # zero rows in front so that any look-back of up to 2H steps is a slice
        self._padded = np.zeros((2 * self.H + self.w_log.shape[0] + 1, self.sys.n))
        self._padded[2 * self.H : 2 * self.H + self.w_log.shape[0]] = self.w_log

    def record(self, t, w):
        """Store ``w_t`` (used by the online rollout as disturbances are recovered)."""
        self.w_log[t - 1] = w
        self._padded[2 * self.H + t - 1] = w

    @property
    def n(self):
        return self.sys.n

    @property
    def m(self):
        return self.sys.m

    @property
    def shape(self):
        return (self.H, self.sys.m, self.sys.n)

    def w(self, t):
        if 1 <= t <= self.w_log.shape[0]:
            return self.w_log[t - 1]
        return np.zeros(self.sys.n)

    def past(self, t, count):
        """Rows ``w_{t-1}, ..., w_{t-count}``."""
        base = 2 * self.H
        if count <= base and 1 <= t <= self.w_log.shape[0] + 1:
            stop = base + t - 2
            return self._padded[stop - count + 1 : stop + 1][::-1]
        idx = t - 1 - np.arange(1, count + 1)
        out = np.zeros((count, self.sys.n))
        ok = (idx >= 0) & (idx < self.w_log.shape[0])
        out[ok] = self.w_log[idx[ok]]
        return out


def _window(ctx, params_window, length):
    W = np.asarray(params_window, dtype=float)
    if W.ndim != 4 or W.shape[0] != length or W.shape[1:] != ctx.shape:
        raise InvalidArgument(f"parameter window must have shape {(length, *ctx.shape)}, got {W.shape}")
    return W


def ideal_state(ctx, params_window, t):
    """Forward-simulate from zero at ``t - H`` using ``M_{t-H} .. M_{t-1}``."""
    if t < 1:
        raise InvalidArgument("t must be >= 1")
    W = _window(ctx, params_window, ctx.H)
    A, B, K, H = ctx.sys.A, ctx.sys.B, ctx.K, ctx.H
    x = np.zeros(ctx.n)
    for idx, j in enumerate(range(t - H, t)):
        u = -K @ x + np.einsum("kab,kb->a", W[idx], ctx.past(j, H))
        x = A @ x + B @ u + ctx.w(j)
    return x


def ideal_action(ctx, M_t, s_t, t):
    M_t = as_params(M_t, *ctx.shape)
    s_t = np.asarray(s_t, dtype=float).reshape(-1)
    if s_t.shape[0] != ctx.n:
        raise InvalidArgument(f"state has length {s_t.shape[0]}, expected {ctx.n}")
    return -ctx.K @ s_t + np.einsum("kab,kb->a", M_t, ctx.past(t, ctx.H))


def ideal_cost_f(ctx, params_window, cost, t):
    """``c_t(s_t, a_t)`` for the window ``M_{t-H} .. M_t`` (length ``H + 1``)."""
    W = _window(ctx, params_window, ctx.H + 1)
    s = ideal_state(ctx, W[:-1], t)
    a = ideal_action(ctx, W[-1], s, t)
    return cost(s, a)


def affine_map(ctx, t):
    """``(s0, Js, a0, Ja)`` describing ``s_t``, ``a_t`` under a constant window."""
    H, n, m = ctx.H, ctx.n, ctx.m
    Wd = ctx.past(t, 2 * H)
    s0 = np.einsum("ixy,iy->x", ctx._powers, Wd[:H])
    # block k (0-based) at unrolling depth i multiplies w_{t-(i+1)-(k+1)}
    idx = np.arange(H)[:, None] + np.arange(H)[None, :] + 1
    Js = np.einsum("ixa,ikb->xkab", ctx._phi, Wd[idx]).reshape(n, H * m * n)
    direct = np.einsum("ac,kb->akcb", np.eye(m), Wd[:H]).reshape(m, H * m * n)
    Ja = -ctx.K @ Js + direct
    return s0, Js, -ctx.K @ s0, Ja


def surrogate_cost_g(ctx, M, cost, t):
    M = as_params(M, *ctx.shape)
    s0, Js, a0, Ja = affine_map(ctx, t)
    m = M.reshape(-1)
    return cost(s0 + Js @ m, a0 + Ja @ m)


def surrogate_value_and_grad(ctx, M, cost, t):
    M = as_params(M, *ctx.shape)
    s0, Js, a0, Ja = affine_map(ctx, t)
    m = M.reshape(-1)
    s, a = s0 + Js @ m, a0 + Ja @ m
    gx, gu = cost.gradients(s, a)
    grad = (Js.T @ gx + Ja.T @ gu).reshape(ctx.shape)
    if not np.all(np.isfinite(grad)):
        raise NumericFailure(f"non-finite surrogate gradient at t={t}")
    return cost(s, a), grad


def surrogate_grad(ctx, M, cost, t):
    """Exact gradient of ``g_t`` with respect to the parameter array."""
    return surrogate_value_and_grad(ctx, M, cost, t)[1]


def stacked_affine_maps(ctx, T):
    """Affine maps for ``t = 1 .. T`` stacked along the first axis."""
    maps = [affine_map(ctx, t) for t in range(1, T + 1)]
    return tuple(np.array(parts) for parts in zip(*maps))
