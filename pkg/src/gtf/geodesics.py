"""Geodesic ODE, exponential and logarithm maps, convex patches and jet checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowUpError, ConvergenceError, DomainExitError, PatchError
from .geometry import gamma_apply

__all__ = [
    "GeodesicSolution", "ConvexPatch", "default_step", "arc_step", "geodesic_solve",
    "exp_map", "log_map", "find_convex_patch", "jet_check_uv",
]

LOG_TOL = 1e-10
LOG_MAX_ITER = 50
LOG_FD_STEP = 1e-6
NEWTON_SWITCH = 0.25


@dataclass
class GeodesicSolution:
    u: np.ndarray
    v: np.ndarray
    t_max: float
    steps: int
    step: float


@dataclass(frozen=True)
class ConvexPatch:
    """Euclidean ball in chart coordinates on which ``log_map`` is trusted."""

    center: np.ndarray
    radius: float

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) < self.radius

    def require(self, *points):
        for x in points:
            if not np.all(self.contains(x)):
                raise PatchError(
                    f"point outside convex patch (center {self.center}, radius {self.radius:.4g})")


def default_step(w):
    """Fixed RK4 step ``1e-3 / max(1, |w|)`` over a batch of initial velocities."""
    wmax = float(np.max(np.linalg.norm(np.atleast_2d(w), axis=-1), initial=0.0))
    return 1e-3 / max(1.0, wmax)


def arc_step(w, h_arc=2e-3, min_steps=8):
    """Step in ``t`` giving arc-coordinate steps of at most ``h_arc`` (and at least ``min_steps`` steps).

    Much coarser than :func:`default_step` for short geodesics; used by the
    transport operator inside kernel quadratures, where every geodesic has
    length of order ``eps``.
    """
    wmax = float(np.max(np.linalg.norm(np.atleast_2d(w), axis=-1), initial=0.0))
    return min(1.0 / min_steps, h_arc / wmax) if wmax > 0 else 1.0 / min_steps


def _resolve_step(step, w):
    if step is None:
        return default_step(w)
    return step(w) if callable(step) else step


def _nsteps(t, step):
    return max(1, int(math.ceil(abs(t) / step - 1e-9)))


def _check(manifold, u, v, time):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowUpError(f"geodesic became non-finite at t = {time:.6g}")
    if not np.all(manifold.contains(u)):
        raise DomainExitError("geodesic left the chart domain", exit_time=time)


def geodesic_solve(manifold, x, w, t=1.0, step=None):
    """Integrate ``u' = v, v' = -Gamma(u)(v, v)`` with fixed-step RK4.

    ``x`` and ``w`` broadcast together with shape ``(..., n)``. ``t`` is a
    scalar or an array over the batch shape; every trajectory uses the same
    number of steps, so each step is at most ``step``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    x, w = np.broadcast_arrays(x, w)
    t_arr = np.asarray(t, dtype=float)
    t_max = float(np.max(np.abs(t_arr)))
    step = _resolve_step(step, w)
    if t_max == 0:
        return GeodesicSolution(x.copy(), w.copy(), 0.0, 0, step)
    tcol = t_arr[..., None] if t_arr.ndim else t_arr
    if manifold.is_flat:
        u = x + tcol * w
        _check(manifold, u, w, t_max)
        return GeodesicSolution(u, w.copy(), t_max, 0, step)
    n = _nsteps(t_max, step)
    if manifold.gamma_kernel is not None:
        u, v, _ = _run_kernel(manifold, x, w, t_arr, n, False)
        return GeodesicSolution(u, v, t_max, n, step)
    h = tcol / n
    G = manifold.christoffel

    def acc(u, v):
        return -gamma_apply(G(u), v, v)

    u, v = x.copy(), w.copy()
    for i in range(n):
        k1u, k1v = v, acc(u, v)
        u2, v2 = u + 0.5 * h * k1u, v + 0.5 * h * k1v
        k2u, k2v = v2, acc(u2, v2)
        u3, v3 = u + 0.5 * h * k2u, v + 0.5 * h * k2v
        k3u, k3v = v3, acc(u3, v3)
        u4, v4 = u + h * k3u, v + h * k3v
        k4u, k4v = v4, acc(u4, v4)
        u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        _check(manifold, u, v, (i + 1) * t_max / n)
    return GeodesicSolution(u, v, t_max, n, step)


def exp_map(manifold, x, w, step=None):
    """``exp_x(w) = u(1, x, w)``."""
    return geodesic_solve(manifold, x, w, 1.0, step).u


def _run_kernel(manifold, x, w, t, nsteps, with_transport):
    u, v, P, status, texit = _kernels.integrate(
        manifold.gamma_kernel, x, w, t, nsteps, manifold.lo, manifold.hi, with_transport)
    if np.any(status == _kernels.BLOW_UP):
        raise BlowUpError(f"geodesic became non-finite at t = {np.max(texit):.6g}")
    if np.any(status == _kernels.DOMAIN_EXIT):
        first = float(np.min(texit[status == _kernels.DOMAIN_EXIT]))
        raise DomainExitError("geodesic left the chart domain", exit_time=first)
    return u, v, P


def _integrate(manifold, x, w, step, with_transport):
    """RK4 of the geodesic (and optionally ``P' = -Gamma(u)(v, P)``) to ``t = 1``."""
    n = x.shape[-1]
    N = _nsteps(1.0, step)
    if manifold.gamma_kernel is not None:
        u, _, P = _run_kernel(manifold, x, w, 1.0, N, with_transport)
        return u, P
    h = 1.0 / N
    G = manifold.christoffel
    u, v = x.copy(), w.copy()
    P = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy() if with_transport else None

    def rhs(u, v, P):
        gv = np.einsum("...kij,...i->...kj", G(u), v)
        acc = -np.einsum("...kj,...j->...k", gv, v)
        return v, acc, (None if P is None else -gv @ P)

    for i in range(N):
        k1 = rhs(u, v, P)
        k2 = rhs(u + 0.5 * h * k1[0], v + 0.5 * h * k1[1], None if P is None else P + 0.5 * h * k1[2])
        k3 = rhs(u + 0.5 * h * k2[0], v + 0.5 * h * k2[1], None if P is None else P + 0.5 * h * k2[2])
        k4 = rhs(u + h * k3[0], v + h * k3[1], None if P is None else P + h * k3[2])
        u = u + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if P is not None:
            P = P + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        _check(manifold, u, v, (i + 1) * h)
    return u, P


def _newton_log(manifold, x, y, tol, max_iter, step, with_transport):
    """Batched Newton solve of ``exp_x(w) = y``; returns ``(w, P)``.

    The first Jacobian estimate is the second-order expansion
    ``I - (Gamma(x)(w, .) + Gamma(x)(., w)) / 2``; points whose residual
    does not contract by at least ``NEWTON_SWITCH`` switch to a central-
    difference Jacobian of the exponential map. When ``with_transport`` is
    set, the transport matrix along the accepted trajectory is returned too.
    """
    n = x.shape[-1]
    xf = x.reshape(-1, n)
    yf = y.reshape(-1, n)
    B = len(xf)
    G0 = manifold.christoffel(xf)
    d = yf - xf
    w = d + 0.5 * gamma_apply(G0, d, d)
    P_out = np.empty((B, n, n)) if with_transport else None
    eye = np.eye(n)
    fd_mode = np.zeros(B, dtype=bool)
    prev = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, wa = xf[idx], w[idx]
        fdi = np.flatnonzero(fd_mode[idx])
        if fdi.size:
            hstep = LOG_FD_STEP * eye
            wx = np.concatenate([wa[fdi][None] + hstep[:, None], wa[fdi][None] - hstep[:, None]]).reshape(-1, n)
            xx = np.broadcast_to(xa[fdi][None], (2 * n, fdi.size, n)).reshape(-1, n)
            xs, ws = np.concatenate([xa, xx]), np.concatenate([wa, wx])
        else:
            xs, ws = xa, wa
        st = _resolve_step(step, ws)
        try:
            ends, P = _integrate(manifold, xs, ws, st, with_transport)
        except (DomainExitError, BlowUpError) as err:
            raise ConvergenceError(f"log_map left the domain during Newton iteration: {err}") from err
        F = ends[:idx.size] - yf[idx]
        r = np.linalg.norm(F, axis=-1)
        done = r < tol
        if with_transport:
            P_out[idx[done]] = P[:idx.size][done]
        active[idx[done]] = False
        if it == max_iter or np.all(done):
            prev[idx] = r
            continue
        J = eye - 0.5 * (np.einsum("bkij,bi->bkj", G0[idx], wa) + np.einsum("bkij,bj->bki", G0[idx], wa))
        if fdi.size:
            e = ends[idx.size:].reshape(2, n, fdi.size, n)
            J[fdi] = np.transpose((e[0] - e[1]) / (2 * LOG_FD_STEP), (1, 2, 0))
        keep = ~done
        dw = np.linalg.solve(J[keep], -F[keep][..., None])[..., 0]
        w[idx[keep]] = wa[keep] + dw
        slow = keep & (r > NEWTON_SWITCH * prev[idx])
        fd_mode[idx[slow]] = True
        prev[idx] = r
        if not np.all(np.isfinite(w)):
            raise ConvergenceError("log_map Newton iteration diverged")
    if np.any(active):
        raise ConvergenceError(
            f"log_map did not converge in {max_iter} iterations "
            f"(residual {np.max(prev[active]):.3g}); pair likely outside a convex patch")
    return w, P_out


def log_map(manifold, x, y, patch=None, tol=LOG_TOL, max_iter=LOG_MAX_ITER, step=None):
    """Initial velocity ``w`` with ``exp_x(w) = y``, by batched Newton iteration.

    The initial guess is ``d + Gamma(x)(d, d) / 2`` with ``d = y - x``, the
    second-order inverse of the exponential map. Raises :class:`ConvergenceError` when the
    residual ``|exp_x(w) - y|`` does not drop below ``tol`` within
    ``max_iter`` iterations.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if patch is not None:
        patch.require(x, y)
    if manifold.is_flat:
        return y - x
    w, _ = _newton_log(manifold, x, y, tol, max_iter, step, False)
    return w.reshape(x.shape)


def find_convex_patch(manifold, x0, rng=None, trials=20, max_halvings=30, cap=1.0):
    """Empirical convex patch around ``x0``.

    Starts at half the distance to the chart boundary (capped at ``cap``)
    and halves the radius until ``trials`` random ``log_map`` calls converge
    and reproduce their endpoints.
    """
    x0 = np.asarray(x0, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    n = x0.shape[-1]
    radius = min(cap, 0.5 * float(manifold.distance_to_boundary(x0)))
    if not radius > 0:
        raise PatchError("center lies outside the chart domain")
    for _ in range(max_halvings):
        d = rng.normal(size=(2, trials, n))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        rad = radius * rng.random((2, trials, 1)) ** (1.0 / n)
        a, b = x0 + rad[0] * d[0], x0 + rad[1] * d[1]
        try:
            w = log_map(manifold, a, b)
            if np.max(np.abs(exp_map(manifold, a, w) - b)) < 1e-9:
                return ConvexPatch(x0, radius)
        except (ConvergenceError, DomainExitError, BlowUpError):
            pass
        radius *= 0.5
    raise PatchError("no convex patch found")



def jet_check_uv(manifold, x, t, rng=None, directions=5, h=1e-3, step=None):
    """Compare finite-difference jets of ``(u, v)`` at ``w = 0`` with the closed forms.

    Checks ``u(t,x,0) = x``, ``v(t,x,0) = 0``, ``u' = xi + t eta``,
    ``v' = eta``, ``u'' = -t^2/2 (Gamma(eta1,eta2) + Gamma(eta2,eta1))`` and
    ``v'' = -t (Gamma(eta1,eta2) + Gamma(eta2,eta1))`` for random direction
    pairs. ``x`` may hold a batch of points and ``t`` one time per point;
    all trajectories are integrated in a single batch. Returns a dict of
    maximal residuals plus ``"max"``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    B, n = x.shape
    t = np.broadcast_to(np.asarray(t, dtype=float), (B,))
    rng = np.random.default_rng(0) if rng is None else rng
    if step is None:
        step = 1e-3
    G = manifold.christoffel(x)[:, None]
    xi = rng.uniform(-1, 1, (B, directions, 2, n))
    eta = rng.uniform(-1, 1, (B, directions, 2, n))
    xb = np.broadcast_to(x[:, None, :], (B, directions, n))
    # stencil rows: base, +/- along (xi1, eta1), four mixed corners
    xs = [xb, xb + h * xi[:, :, 0], xb - h * xi[:, :, 0]]
    ws = [np.zeros_like(xb), h * eta[:, :, 0], -h * eta[:, :, 0]]
    signs = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
    for s1, s2, _ in signs:
        xs.append(xb + h * (s1 * xi[:, :, 0] + s2 * xi[:, :, 1]))
        ws.append(h * (s1 * eta[:, :, 0] + s2 * eta[:, :, 1]))
    tt = np.broadcast_to(t[None, :, None], (len(xs), B, directions))
    sol = geodesic_solve(manifold, np.stack(xs), np.stack(ws), tt, step)
    out = np.concatenate([sol.u, sol.v], axis=-1)
    tb = t[:, None, None]
    res = {
        "u": float(np.max(np.abs(out[0, ..., :n] - xb))),
        "v": float(np.max(np.abs(out[0, ..., n:]))),
    }
    d1 = (out[1] - out[2]) / (2 * h)
    res["du"] = float(np.max(np.abs(d1[..., :n] - (xi[:, :, 0] + tb * eta[:, :, 0]))))
    res["dv"] = float(np.max(np.abs(d1[..., n:] - eta[:, :, 0])))
    d2 = sum(sg * out[3 + i] for i, (_, _, sg) in enumerate(signs)) / (4 * h * h)
    sym = gamma_apply(G, eta[:, :, 0], eta[:, :, 1]) + gamma_apply(G, eta[:, :, 1], eta[:, :, 0])
    res["d2u"] = float(np.max(np.abs(d2[..., :n] + 0.5 * tb * tb * sym)))
    res["d2v"] = float(np.max(np.abs(d2[..., n:] + tb * sym)))
    res["max"] = max(res.values())
    return res
