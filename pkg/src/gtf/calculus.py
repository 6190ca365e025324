"""Pullback and Lie derivative of generalized fields and the commutation experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import LIE_TAU, LieDerivative, PulledBack, TestObject, map_dual
from .embedding import GeneralizedField, embed_density, embedded_field
from .geometry import FlowMap, gamma_apply
from .mollifiers import PulledBackDensity
from .reports import SweepReport, make_report
from .transport import gamma_prime_apply, pullback_transport, tensor_map

__all__ = [
    "pullback_field", "pullback_generalized", "lie_field", "lie_generalized",
    "transport_lie_test", "CommutationReport", "commutator_residual",
    "connection_mismatch_residual", "transport_first_derivative",
    "transported_lie_derivative", "second_order_formula", "second_order_fd",
    "homothety_commutation",
]

FD_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# pullback and Lie derivative

def pullback_field(mu, R: GeneralizedField) -> GeneralizedField:
    """``(mu^* R)(omega)(p) = (T mu)^*[R(mu_* omega)(mu(p))]`` with ``mu_* = (mu^-1)^*``."""
    r, s = R.rank
    inv = mu.inverted()

    def ev(omega, p):
        p = np.asarray(p, dtype=float)
        val = R(PulledBackDensity(omega, inv), mu(p[None])[0])
        if r + s == 0:
            return val
        return tensor_map(np.linalg.inv(mu.jacobian(p[None])[0]), val, r, s)

    return GeneralizedField(R.rank, R.dim, ev, "derived")


def pullback_generalized(mu, R, kernel, eps, p):
    """``(mu^* R)(Phi(eps, p))(p)``."""
    return pullback_field(mu, R).at(kernel, eps, p)


def lie_field(X, R: GeneralizedField, tau=LIE_TAU, manifold=None, step=1e-3) -> GeneralizedField:
    """``L_X R = d/dt (Fl_t)^* R`` at 0: central differences at ``tau`` and ``tau/2`` plus Richardson."""
    if getattr(X, "is_zero", lambda: False)():
        return GeneralizedField(R.rank, R.dim, lambda om, p: 0.0 * R(om, p), "derived")

    def ev(omega, p):
        def D(t):
            plus = pullback_field(FlowMap(X, t, step, manifold), R)(omega, p)
            minus = pullback_field(FlowMap(X, -t, step, manifold), R)(omega, p)
            return (plus - minus) / (2 * t)
        return (4 * D(tau / 2) - D(tau)) / 3

    return GeneralizedField(R.rank, R.dim, ev, "derived")


def lie_generalized(X, R, kernel, eps, p, tau=LIE_TAU, manifold=None):
    """``(L_X R)(Phi(eps, p))(p)``."""
    return lie_field(X, R, tau, manifold).at(kernel, eps, p)


# ---------------------------------------------------------------------------
# commutator with Lie derivatives

def transport_lie_test(A, X, p, v, omega, rank, tau=LIE_TAU, manifold=None, step=1e-3):
    """Test object ``(L_{X x X} A)(p, .) v (x) omega`` (tensor transport of the dual ``v``)."""
    r, s = rank
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)

    def mapped(t, q):
        fl = FlowMap(X, t, step, manifold)
        a = pullback_transport(fl, fl, A, p, q)
        return map_dual(a, v, r, s)

    def u(q):
        q = np.atleast_2d(np.asarray(q, dtype=float))

        def D(t):
            return (mapped(t, q) - mapped(-t, q)) / (2 * t)
        return (4 * D(tau / 2) - D(tau)) / 3

    return TestObject(u, omega, tuple(rank))


@dataclass
class CommutationReport(SweepReport):
    """Residuals ``D(eps)`` with the closed-form comparison values and a verdict."""

    closed: np.ndarray = field(default_factory=lambda: np.zeros(0))
    verdict: str = ""

    def summary(self):
        out = super().summary()
        out["verdict"] = self.verdict
        out["closed_form_max"] = float(np.max(np.abs(self.closed))) if self.closed.size else float("nan")
        return out


def _as_commutation(rep: SweepReport, closed, verdict):
    return CommutationReport(rep.name, rep.eps, rep.value, rep.error, rep.fit, rep.threshold,
                             rep.passed, rep.reference, rep.checks, rep.info,
                             np.asarray(closed, dtype=float), verdict)


def commutator_residual(T, A, X, kernel, p, v, eps_grid, manifold=None, tau=LIE_TAU,
                        rel_tol=5e-3, closed_zero=1e-4, floor=FD_FLOOR):
    """``D(eps) = (iota(L_X T) - L_X(iota T))(Phi(eps, p))(p) . v`` and its closed form.

    The closed form is ``-<T, (L_{X x X} A)(p, .) v (x) Phi(eps, p)>``,
    computed from flows of the transport operator only. The verdict is
    ``"commutes"`` when the closed form stays below ``closed_zero`` and
    ``D`` decays (slope >= 0.8 or below ``floor``); otherwise
    ``"fails-with-formula-match"`` when ``|D - C| <= rel_tol |C|`` at every
    eps, and ``"mismatch"`` if neither holds.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    R = embedded_field(T, A)
    LR = lie_field(X, R, tau, manifold)
    LT = LieDerivative(T, X, tau, manifold=manifold)
    D, C = [], []
    for eps in eps_grid:
        omega = kernel.density(eps, p)
        left = embed_density(LT, A, omega, p, v)
        right = float(np.sum(np.asarray(LR(omega, p)) * v))
        D.append(left - right)
        C.append(-float(T.pair(transport_lie_test(A, X, p, v, omega, T.rank, tau, manifold))))
    D, C = np.array(D), np.array(C)
    closed_small = bool(np.max(np.abs(C)) < closed_zero)
    match = np.abs(D - C) <= rel_tol * np.abs(C)
    if closed_small:
        rep = make_report("commutator", eps_grid, D, D, 0.8, 0.0, floor,
                          checks={"closed_form_small": True})
        verdict = "commutes" if rep.passed else "mismatch"
    else:
        rep = make_report("commutator", eps_grid, D, np.abs(D - C) / np.abs(C), -np.inf, float(C[-1]), 0.0,
                          checks={"formula_match": bool(np.all(match)),
                                  "nonzero": bool(np.all(np.abs(D) > 1e-3))})
        verdict = "fails-with-formula-match" if np.all(match) else "mismatch"
    rep.info["verdict"] = verdict
    return _as_commutation(rep, C, verdict)


# ---------------------------------------------------------------------------
# connection mismatch and first-order transport derivatives

def transport_first_derivative(A, p, Y, Z, h=1e-3):
    """``d/dh A(p, p + h Y) Z`` at 0 by central differences."""
    p = np.asarray(p, dtype=float)
    Y = np.asarray(Y, dtype=float)
    q = np.stack([p + h * Y, p - h * Y])
    a = A(np.broadcast_to(p, q.shape), q)
    return (a[0] - a[1]) @ np.asarray(Z, dtype=float) / (2 * h)


def transported_lie_derivative(A, X, Z, p, tau=LIE_TAU, manifold=None, step=1e-3):
    """``L_X(q -> A(p, q) Z(p))(p)``: derivative at 0 of ``T Fl_-t A(p, Fl_t p) Z(p)``.

    Should equal ``-X'(p) Z - Gamma(p)(X(p), Z)``.
    """
    p = np.asarray(p, dtype=float)
    Z = np.asarray(Z, dtype=float)

    def val(t):
        fl = FlowMap(X, t, step, manifold)
        q = fl(p[None])[0]
        back = FlowMap(X, -t, step, manifold).jacobian(q[None])[0]
        return back @ (A(p, q) @ Z)

    def D(t):
        return (val(t) - val(-t)) / (2 * t)

    return (4 * D(tau / 2) - D(tau)) / 3


def connection_mismatch_residual(T, A, A_tilde, manifold, manifold_tilde, kernel, p, v, eps_grid,
                                 probes=(), h=1e-3, tol=2e-4):
    """``R(eps) = (iota_A - iota_Atilde)(T)(Phi(eps, p))(p) . v`` plus first-order probes.

    ``probes`` lists ``(x, Y, Z)`` triples; for each the FD derivative of
    ``q -> (A - Atilde)(x, q) Z`` along ``Y`` at ``q = x`` is compared with
    ``(Gamma_tilde - Gamma)(x)(Y, Z)``. The report's ``error`` column holds
    ``|R(eps)|``; ``info["probe_max"]`` the largest probe residual.
    """
    p = np.asarray(p, dtype=float)
    vals = []
    for eps in eps_grid:
        omega = kernel.density(eps, p)
        vals.append(embed_density(T, A, omega, p, v) - embed_density(T, A_tilde, omega, p, v))
    vals = np.array(vals)
    worst = 0.0
    for x, Y, Z in probes:
        fd = transport_first_derivative(A, x, Y, Z, h) - transport_first_derivative(A_tilde, x, Y, Z, h)
        x = np.asarray(x, dtype=float)[None]
        want = (gamma_apply(manifold_tilde.christoffel(x), np.asarray(Y)[None], np.asarray(Z)[None])
                - gamma_apply(manifold.christoffel(x), np.asarray(Y)[None], np.asarray(Z)[None]))[0]
        worst = max(worst, float(np.max(np.abs(fd - want))))
    rep = make_report("connection_mismatch", eps_grid, vals, vals, -np.inf, 0.0, 0.0,
                      checks={"probes": worst <= tol},
                      info={"probe_max": worst, "probe_count": len(probes)})
    return rep


# ---------------------------------------------------------------------------
# second-order formula

def second_order_formula(manifold, X, Y, Z, x, variant="derived"):
    """Closed form of ``L_Y(q -> (L_{X x X} A)(p, q) Z(p))(p)`` in a chart.

    ``variant="derived"`` (default) evaluates

        -X''(Y, Z) + X' Gamma(Y, Z) - (Gamma'.X)(Y, Z) - Gamma(X'Y, Z) - Gamma(Y, X'Z),

    obtained from the second transport jet with arguments ``((X, X), (0, Y))``.
    ``variant="printed"`` evaluates the longer displayed expression in which
    that jet enters with ``((X, Y), (0, Y))``; the two agree when ``Gamma``
    vanishes near ``x``. ``X`` is a vector field; ``Y`` and ``Z`` are vectors
    at ``x``.
    """
    x = np.asarray(x, dtype=float)[None]
    Y = np.asarray(Y, dtype=float)[None]
    Z = np.asarray(Z, dtype=float)[None]
    G = manifold.christoffel(x)
    dG = manifold.gamma_derivative(x)
    Xv = X.value(x)
    J = X.jacobian(x)
    H = X.second(x)
    term_xx = -np.einsum("bkij,bi,bj->bk", H, Y, Z)
    term_xg = np.einsum("bki,bi->bk", J, gamma_apply(G, Y, Z))
    JY = np.einsum("bki,bi->bk", J, Y)
    JZ = np.einsum("bki,bi->bk", J, Z)
    tail = -gamma_apply(G, JY, Z) - gamma_apply(G, Y, JZ)
    if variant == "derived":
        out = term_xx + term_xg - gamma_prime_apply(dG, Xv, Y, Z) + tail
    elif variant == "printed":
        YmX = Y - Xv
        half = (gamma_prime_apply(dG, Xv + Y, Y, Z) + gamma_prime_apply(dG, Y, YmX, Z)
                - gamma_apply(G, YmX, gamma_apply(G, Y, Z)) - gamma_apply(G, Y, gamma_apply(G, YmX, Z)))
        out = term_xx + term_xg - 0.5 * half + tail
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return out[0]


def second_order_fd(A, X, Y, Z, x, h=1e-3, tau=LIE_TAU, manifold=None):
    """Double finite difference: derivative along ``Y`` of ``q -> (L_{X x X} A)(x, q) Z`` at ``q = x``.

    The inner Lie derivative comes from flows (central differences plus
    Richardson); the outer derivative is a fourth-order central difference.
    """
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    q = np.stack([x + 2 * h * Y, x + h * Y, x - h * Y, x - 2 * h * Y])

    def mapped(t):
        fl = FlowMap(X, t, 1e-3, manifold)
        return pullback_transport(fl, fl, A, x, q) @ Z

    def D(t):
        return (mapped(t) - mapped(-t)) / (2 * t)

    W = (4 * D(tau / 2) - D(tau)) / 3
    return (-W[0] + 8 * W[1] - 8 * W[2] + W[3]) / (12 * h)


# ---------------------------------------------------------------------------
# homothety commutation

def homothety_commutation(mu, T, A, kernel, points, eps_grid, tol=None, floor=1e-13):
    """Residual of ``iota(mu^* T) - mu^*(iota T)`` over ``points`` for each eps.

    Passes when the sup residual decays with slope >= 0.8 or, if ``tol`` is
    given, stays below ``tol`` at every eps (exact-symmetry cases).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    R = embedded_field(T, A)
    muR = pullback_field(mu, R)
    Tpb = PulledBack(T, mu)
    vals, errs = [], []
    for eps in eps_grid:
        worst, scale = 0.0, 0.0
        for p in points:
            omega = kernel.density(eps, p)
            lhs = np.asarray(embed_density(Tpb, A, omega, p))
            rhs = np.asarray(muR(omega, p))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            scale = max(scale, float(np.max(np.abs(lhs))))
        vals.append(scale)
        errs.append(worst)
    errs = np.array(errs)
    checks = {}
    if tol is not None:
        checks["below_tol"] = bool(np.all(errs < tol))
    rep = make_report("homothety_commutation", eps_grid, vals, errs, 0.8, float("nan"), floor, checks)
    if tol is not None and checks["below_tol"]:
        rep.passed = True
    return rep
