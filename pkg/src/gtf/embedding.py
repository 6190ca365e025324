"""The embedding iota of tensor distributions, the sigma embedding and convergence harnesses.

A generalized field is represented by its evaluator ``R(omega, p)``: the
value at ``p`` of the field indexed by the n-form ``omega`` (in practice
``omega = Phi(eps, p)`` or a pulled-back kernel). For an embedded
distribution

    iota(T)(omega)(p)_I = <T, A(p, .) e^I (x) omega>

where ``e^I`` runs over the dual basis at ``p`` and ``A`` transports it to
every quadrature node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import Regular, TestObject, map_dual
from .mollifiers import WindowDensity
from .reports import make_report
from .transport import TransportOperator

__all__ = [
    "GeneralizedField", "embedded_field", "sigma_embed", "embed", "embed_density",
    "dual_basis_test", "regularize", "smeared_test", "regularized_pair",
    "regularized_pair_direct", "weak_convergence_test", "iota_vs_sigma",
    "injectivity_probe", "as_transport",
]


def as_transport(A, manifold=None):
    """Accept a TransportOperator, a manifold or a plain callable ``A(x, y)``."""
    if A is None:
        return TransportOperator(manifold)
    if hasattr(A, "christoffel"):
        return TransportOperator(A)
    return A


@dataclass
class GeneralizedField:
    """A field ``omega -> (p -> tensor)`` given by ``evaluator(omega, p)``."""

    rank: tuple
    dim: int
    evaluator: Callable
    provenance: str = "derived"

    def __call__(self, omega, p):
        return np.asarray(self.evaluator(omega, np.asarray(p, dtype=float)), dtype=float)

    def at(self, kernel, eps, p):
        """Value at ``p`` for the kernel ``Phi(eps, p)``."""
        p = np.asarray(p, dtype=float)
        return self(kernel.density(eps, p), p)

    def contract(self, u, rank_u=None):
        """Full contraction with a dual field ``u(p)`` (covector slots first)."""
        def ev(omega, p):
            return float(np.sum(self(omega, p) * np.asarray(u(p), dtype=float)))
        return GeneralizedField((0, 0), self.dim, ev, "derived")

    def scaled(self, c):
        return GeneralizedField(self.rank, self.dim, lambda om, p: c * self(om, p), self.provenance)

    def __add__(self, other):
        return GeneralizedField(self.rank, self.dim, lambda om, p: self(om, p) + other(om, p), "derived")

    def __sub__(self, other):
        return GeneralizedField(self.rank, self.dim, lambda om, p: self(om, p) - other(om, p), "derived")


def dual_basis_test(A, p, omega, rank, dim):
    """Test object pairing with every component at once: ``u_I(q) = A(p, q) e^I``."""
    r, s = rank
    if r + s == 0:
        return TestObject.scalar(omega)
    N = dim ** (r + s)
    basis = np.eye(N).reshape((N,) + (dim,) * (r + s))
    p = np.asarray(p, dtype=float)

    def u(q):
        a = A(np.broadcast_to(p, q.shape), q)
        return map_dual(a[:, None], basis[None], r, s)

    return TestObject(u, omega, rank, (dim,) * (r + s))


def embed_density(T, A, omega, p, v=None):
    """``iota(T)(omega)(p)``: all components, or the contraction with the dual ``v`` at ``p``."""
    p = np.asarray(p, dtype=float)
    dim = p.size
    comps = T.pair(dual_basis_test(A, p, omega, T.rank, dim))
    if v is None:
        return comps
    return float(np.sum(np.asarray(comps) * np.asarray(v, dtype=float)))


def embed(T, A, kernel, eps, p, v=None):
    """``<T, A(p, .) v(p) (x) Phi(eps, p)>`` (all components when ``v`` is None)."""
    p = np.asarray(p, dtype=float)
    return embed_density(T, A, kernel.density(eps, p), p, v)


def embedded_field(T, A) -> GeneralizedField:
    return GeneralizedField(tuple(T.rank), getattr(T, "dim", None),
                            lambda omega, p: embed_density(T, A, omega, p), "embedded-distribution")


def sigma_embed(t, rank, dim) -> GeneralizedField:
    """``sigma(t)``: ignores the kernel and returns ``t(p)``.

    ``t`` is a callable on points ``(P, n)`` returning ``(P, N)`` or
    ``(P, n, ..., n)`` components, or a :class:`Regular` distribution.
    """
    field = t.values if isinstance(t, Regular) else t
    r, s = rank

    def ev(omega, p):
        vals = np.asarray(field(np.asarray(p, dtype=float)[None]), dtype=float)
        return vals.reshape((dim,) * (r + s)) if r + s else float(vals.reshape(-1)[0])

    return GeneralizedField(tuple(rank), dim, ev, "sigma-smooth")


def regularize(T, A, kernel, eps, grid):
    """``T_eps(p) = iota(T)(Phi(eps, p))(p)`` at every grid point; shape ``(G, n, ..., n)``."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    return np.array([embed(T, A, kernel, eps, p) for p in grid])


# ---------------------------------------------------------------------------
# weak convergence

def _support_box(omega, pad):
    if isinstance(omega, WindowDensity):
        return omega.lo - pad, omega.hi + pad
    c, rad = omega.support
    return c - rad - pad, c + rad + pad


def smeared_test(xi: TestObject, A, kernel, eps, nodes=24, panels=None):
    """The test object ``Psi`` with ``<rho(T_eps), xi> = <T, Psi>`` for every ``T``.

    ``Psi(y) = int omega(x) Phi(eps, x)(y) A(x, y) u(x) dx``. The kernel is
    radial, so ``Phi(eps, x)(y) = Phi(eps, y)(x)`` and the inner integral
    uses the kernel nodes centred at ``y``; this is exact Fubini and avoids
    resolving the eps-scale structure of ``T_eps`` with an outer grid.
    """
    r, s = xi.rank
    lo, hi = _support_box(xi.omega, kernel.support_radius(eps))
    if panels is None:
        panels = 2
    box = WindowDensity(lo, hi, None, power=0, nodes=nodes, panels=panels)

    def u(y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        P = y.shape[0]
        pts, w = kernel.nodes(eps, np.zeros(y.shape[-1]))
        K = len(w)
        x = (y[:, None, :] + pts[None]).reshape(-1, y.shape[-1])
        yy = np.repeat(y, K, axis=0)
        om = np.asarray(xi.omega(x), dtype=float)
        live = om != 0.0
        vals = np.asarray(xi.u(x[live]), dtype=float)
        if r + s:
            a = A(x[live], yy[live])
            a = a.reshape(a.shape[:1] + (1,) * len(xi.batch_shape) + a.shape[1:])
            vals = map_dual(a, vals, r, s)
        full = np.zeros((P * K,) + vals.shape[1:])
        full[live] = vals * (om[live]).reshape((-1,) + (1,) * (vals.ndim - 1))
        full = full.reshape((P, K) + vals.shape[1:])
        return np.tensordot(w, full, axes=([0], [1]))

    return TestObject(u, box, xi.rank, xi.batch_shape)


def regularized_pair(T, A, kernel, eps, xi, nodes=24):
    """``<rho(T_eps), xi> = int <T_eps(x), u(x)> omega(x) dx`` via :func:`smeared_test`."""
    return T.pair(smeared_test(xi, A, kernel, eps, nodes))


def regularized_pair_direct(T, A, kernel, eps, xi):
    """The same pairing by outer quadrature over the nodes of ``omega`` (reference path)."""
    pts, w = xi.omega.nodes()
    total = 0.0
    for x, wx in zip(pts, w):
        if wx == 0.0:
            continue
        comps = np.asarray(embed(T, A, kernel, eps, x))
        uval = np.asarray(xi.u(x[None]), dtype=float)[0]
        total += wx * float(np.sum(comps * uval))
    return total


def weak_convergence_test(T, A, kernel, xi, eps_grid, threshold=0.8, nodes=24, floor=1e-13):
    """Rate of ``d(eps) = |<rho(T_eps) - T, xi>|``; passes if the slope is >= ``threshold``."""
    ref = float(T.pair(xi))
    vals = np.array([regularized_pair(T, A, kernel, e, xi, nodes) for e in eps_grid])
    return make_report("weak_convergence", eps_grid, vals, vals - ref, threshold, ref, floor)


def iota_vs_sigma(T, A, kernel, grid, eps_grid, threshold=None, floor=1e-13):
    """``sup_K |iota(T)(Phi(eps, p))(p) - t(p)|`` for a smooth regular ``T``.

    The default threshold is ``k + 0.8`` with ``k`` the kernel order.
    """
    if threshold is None:
        threshold = kernel.order + 0.8
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    exact = T.values(grid)
    vals, errs = [], []
    for e in eps_grid:
        got = np.array([np.asarray(embed(T, A, kernel, e, p)).ravel() for p in grid])
        diff = np.abs(got - exact)
        vals.append(float(np.max(np.abs(got))))
        errs.append(float(np.max(diff)))
    return make_report("iota_vs_sigma", eps_grid, vals, errs, threshold, float(np.max(np.abs(exact))), floor)


def injectivity_probe(T, A, kernel, xi, eps_grid, zero_tol=1e-8, match_tol=1e-6, values=None):
    """Does ``<rho(T_eps), xi>`` tend to a nonzero limit when ``<T, xi> != 0``?

    Returns ``(nonzero, limit, reference)``. The limit is the value at the
    smallest eps; ``nonzero`` requires it to exceed ``zero_tol`` and to agree
    with ``<T, xi>`` within ``match_tol``. A zero reference reports ``False``.
    Pass ``values`` (pairings already computed over ``eps_grid``) to skip the sweep.
    """
    ref = float(T.pair(xi))
    if values is None:
        values = [regularized_pair(T, A, kernel, e, xi) for e in eps_grid]
    vals = list(values)
    limit = float(vals[-1])
    nonzero = abs(limit) > zero_tol and abs(limit - ref) <= match_tol
    return bool(nonzero), limit, ref
