"""Parallel transport, the transport operator a(x, y) and its tensor extension."""

from __future__ import annotations

import string
import threading
from dataclasses import dataclass

import numpy as np

from .errors import RankError
from .geodesics import LOG_MAX_ITER, _newton_log, arc_step
from .geometry import FlowMap, gamma_apply

__all__ = [
    "TensorValue", "transport_matrix", "parallel_transport", "TransportOperator",
    "tensor_map", "transport_tensor", "tensor_product", "gamma_prime_apply",
    "jet_check_transport", "pullback_transport", "lie_transport",
    "holonomy_angle",
]


@dataclass(frozen=True)
class TensorValue:
    """Components of an ``(r, s)`` tensor at a point.

    ``components`` has ``r + s`` axes of length ``n``; contravariant axes come
    first.
    """

    r: int
    s: int
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.ndim == 1 and self.r + self.s > 1:
            n = round(comps.size ** (1.0 / (self.r + self.s)))
            comps = comps.reshape((n,) * (self.r + self.s))
        if comps.ndim != self.r + self.s or len(set(comps.shape)) > 1:
            raise RankError(f"component array of shape {comps.shape} does not fit rank ({self.r},{self.s})")
        object.__setattr__(self, "components", comps)

    @property
    def rank(self):
        return (self.r, self.s)

    def flat(self):
        return self.components.ravel()


def gamma_prime_apply(dG, w, a, b):
    """``(Gamma' . w)(a, b)`` with ``dG[..., k, i, j, l] = d_l Gamma^k_ij``."""
    return np.einsum("...kijl,...l,...i,...j->...k", dG, w, a, b)


# ---------------------------------------------------------------------------

def transport_matrix(manifold, x, y, patch=None, step=None, tol=1e-12):
    """The transport operator ``a(x, y)``: parallel transport along the geodesic from x to y.

    ``x`` and ``y`` broadcast with shape ``(..., n)``; the result has shape
    ``(..., n, n)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if patch is not None:
        patch.require(x, y)
    n = x.shape[-1]
    if manifold.is_flat:
        return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
    _, P = _newton_log(manifold, x, y, tol, LOG_MAX_ITER, step, True)
    return P.reshape(x.shape + (n,))


def parallel_transport(manifold, x, y, zeta, patch=None, step=None):
    """Transport the vector ``zeta`` from ``x`` to ``y`` along the connecting geodesic."""
    a = transport_matrix(manifold, x, y, patch, step)
    return np.einsum("...ij,...j->...i", a, np.asarray(zeta, dtype=float))


class TransportOperator:
    """Callable ``a(x, y)`` with a thread-safe memo table.

    ``step`` sets the RK4 step of the geodesic and transport solves (a number
    or a callable of the batch of initial velocities). The default
    :func:`~gtf.geodesics.arc_step` bounds the step in arc coordinates,
    which keeps the many short geodesics of kernel quadratures cheap.
    """

    def __init__(self, manifold, patch=None, step=arc_step, cache_size=500_000):
        self.manifold = manifold
        self.patch = patch
        self.step = step
        self.cache_size = cache_size
        self._cache = {}
        self._lock = threading.Lock()
        self.dim = manifold.dim

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        n = self.dim
        shape = x.shape[:-1]
        if self.patch is not None:
            self.patch.require(x, y)
        if self.manifold.is_flat:
            return np.broadcast_to(np.eye(n), shape + (n, n)).copy()
        xf = np.ascontiguousarray(x.reshape(-1, n))
        yf = np.ascontiguousarray(y.reshape(-1, n))
        keys = [xf[i].tobytes() + yf[i].tobytes() for i in range(len(xf))]
        out = np.empty((len(xf), n, n))
        missing = []
        cache = self._cache
        for i, k in enumerate(keys):
            hit = cache.get(k)
            if hit is None:
                missing.append(i)
            else:
                out[i] = hit
        if missing:
            idx = np.array(missing)
            # distinct pairs only
            uniq = {}
            for i in missing:
                uniq.setdefault(keys[i], i)
            first = np.array(list(uniq.values()))
            mats = transport_matrix(self.manifold, xf[first], yf[first], step=self.step)
            lookup = {keys[i]: m for i, m in zip(first, mats)}
            for i in idx:
                out[i] = lookup[keys[i]]
            with self._lock:
                if len(cache) + len(lookup) > self.cache_size:
                    cache.clear()
                for k, m in lookup.items():
                    m.setflags(write=False)
                    cache[k] = m
        return out.reshape(shape + (n, n))

    def tensor_map(self, x, y, comps, r, s):
        """Apply ``A^r_s(x, y)`` to component arrays over ``x``."""
        return tensor_map(self(x, y), comps, r, s)

    def clear_cache(self):
        with self._lock:
            self._cache.clear()


def tensor_map(a, comps, r, s, inverse_adjoint=None):
    """Apply ``a^{(x)r} (x) ((a^-1)^T)^{(x)s}`` to tensor components.

    ``a`` has shape ``(..., n, n)``; ``comps`` has shape ``(..., n, ..., n)``
    with ``r + s`` trailing axes (contravariant first).
    """
    if r + s == 0:
        return np.asarray(comps, dtype=float)
    a = np.asarray(a, dtype=float)
    comps = np.asarray(comps, dtype=float)
    b = np.swapaxes(np.linalg.inv(a), -1, -2) if s and inverse_adjoint is None else inverse_adjoint
    letters = string.ascii_letters
    src = letters[:r + s]
    dst = letters[r + s:2 * (r + s)]
    ops, subs = [], []
    for i in range(r + s):
        ops.append(a if i < r else b)
        subs.append("..." + dst[i] + src[i])
    subscripts = ",".join(subs) + ",..." + src + "->..." + dst
    return np.einsum(subscripts, *ops, comps, optimize=r + s > 2)


def transport_tensor(A, x, y, T: TensorValue) -> TensorValue:
    """Transport the tensor ``T`` from the fiber over ``x`` to the fiber over ``y``."""
    if T.r + T.s == 0:
        return T
    comps = tensor_map(A(x, y), T.components, T.r, T.s)
    return TensorValue(T.r, T.s, comps)


def tensor_product(S: TensorValue, T: TensorValue) -> TensorValue:
    """``S (x) T`` with contravariant axes of both first, then covariant ones."""
    outer = np.multiply.outer(S.components, T.components)
    order = (list(range(S.r)) + [S.r + S.s + i for i in range(T.r)]
             + [S.r + i for i in range(S.s)] + [S.r + S.s + T.r + i for i in range(T.s)])
    return TensorValue(S.r + T.r, S.s + T.s, np.transpose(outer, order))


# ---------------------------------------------------------------------------

def jet_check_transport(manifold, x, rng=None, pairs=20, h=1e-3, step=None):
    """Finite-difference jets of ``a`` at the diagonal against the closed forms.

    Compares ``a(x,x) = id``, ``a'(x,x)(xi,eta) zeta = -Gamma(eta-xi, zeta)``
    and the second-order formula with ``Gamma'`` terms, over ``pairs`` random
    direction pairs. Returns a dict with residuals ``"i"``, ``"ii"``,
    ``"iii"`` and ``"max"``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    rng = np.random.default_rng(0) if rng is None else rng
    G = manifold.christoffel(x)
    dG = manifold.gamma_derivative(x)
    xi = rng.uniform(-1, 1, (pairs, 2, n))
    eta = rng.uniform(-1, 1, (pairs, 2, n))
    zeta = rng.uniform(-1, 1, (pairs, n))
    # one batched transport over all stencil points
    ps = [x[None], x + h * xi[:, 0], x - h * xi[:, 0]]
    qs = [x[None], x + h * eta[:, 0], x - h * eta[:, 0]]
    signs = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
    for s1, s2, _ in signs:
        ps.append(x + h * (s1 * xi[:, 0] + s2 * xi[:, 1]))
        qs.append(x + h * (s1 * eta[:, 0] + s2 * eta[:, 1]))
    ps = np.concatenate([np.broadcast_to(p, (pairs if p.shape[0] > 1 else 1, n)) for p in ps])
    qs = np.concatenate([np.broadcast_to(q, (pairs if q.shape[0] > 1 else 1, n)) for q in qs])
    a = transport_matrix(manifold, ps, qs, step=step)
    a0, rest = a[0], a[1:].reshape(6, pairs, n, n)
    res = {"i": float(np.max(np.abs(a0 - np.eye(n))))}
    d1 = np.einsum("pij,pj->pi", (rest[0] - rest[1]) / (2 * h), zeta)
    want1 = -gamma_apply(G, eta[:, 0] - xi[:, 0], zeta)
    res["ii"] = float(np.max(np.abs(d1 - want1)))
    d2 = sum(sg * rest[2 + i] for i, (_, _, sg) in enumerate(signs)) / (4 * h * h)
    lhs = 2 * np.einsum("pij,pj->pi", d2, zeta)
    e1, e2 = eta[:, 0] - xi[:, 0], eta[:, 1] - xi[:, 1]
    want2 = (-gamma_prime_apply(dG, eta[:, 0] + xi[:, 0], e2, zeta)
             - gamma_prime_apply(dG, eta[:, 1] + xi[:, 1], e1, zeta)
             + gamma_apply(G, e1, gamma_apply(G, e2, zeta))
             + gamma_apply(G, e2, gamma_apply(G, e1, zeta)))
    res["iii"] = float(np.max(np.abs(lhs - want2)))
    res["max"] = max(res.values())
    return res


def pullback_transport(mu, nu, A, p, q):
    """``((mu, nu)^* A)(p, q) = (D nu(q))^-1 A(mu(p), nu(q)) D mu(p)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a = A(mu(p), nu(q))
    return np.linalg.solve(nu.jacobian(q), a @ mu.jacobian(p))


def lie_transport(A, X, Y, p, q, tau=1e-3, manifold=None):
    """``(L_{X x Y} A)(p, q)``: derivative at 0 of the flow pullback, by central differences.

    Uses steps ``tau`` and ``tau / 2`` combined by one Richardson step.
    """
    def D(t):
        plus = pullback_transport(FlowMap(X, t, manifold=manifold), FlowMap(Y, t, manifold=manifold), A, p, q)
        minus = pullback_transport(FlowMap(X, -t, manifold=manifold), FlowMap(Y, -t, manifold=manifold), A, p, q)
        return (plus - minus) / (2 * t)

    return (4 * D(tau / 2) - D(tau)) / 3


def holonomy_angle(manifold, vertices, zeta=None, step=None):
    """Rotation angle of parallel transport around a closed geodesic polygon.

    ``vertices`` lists the corners in chart coordinates; the last entry must
    represent the same point as the first (possibly in a shifted chart
    coordinate with the same metric). The angle is measured in a
    ``g``-orthonormal frame at the first vertex.
    """
    V = np.asarray(vertices, dtype=float)
    n = V.shape[-1]
    P = np.eye(n)
    for a, b in zip(V[:-1], V[1:]):
        P = transport_matrix(manifold, a, b, step=step)[()] @ P
    g0 = manifold.metric(V[0])
    L = np.linalg.cholesky(g0)           # g = L L^T, orthonormal coords are L^T v
    R = L.T @ P @ np.linalg.inv(L.T)
    return float(np.arctan2(R[1, 0], R[0, 0])), P
