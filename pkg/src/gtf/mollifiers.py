"""Radial mollifiers with vanishing moments and translation-scale smoothing kernels.

The radial profile is ``phi1(s) = bump(s) * P(s)`` on ``[0, s_max]``: the bump
is a C^2 piecewise cubic equal to 1 on ``[0, a]`` (``a = plateau * s_max``)
and falling to 0 at ``s_max``; ``P`` is constant on ``[0, a]``. The bump on
``R^n`` is ``phi(z) = phi1(|z|^n)``, and the moment conditions read

    int_0^inf s^(j/n) phi1(s) ds = n / omega_n  (j = 0),  0  (j = 1..q).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, optimize

from .errors import IllConditionedError, ParseError, SupportError
from .fitting import fit_slope
from .quadrature import gauss_legendre, piecewise_gauss_legendre, sphere_rule, tensor_gauss_legendre

__all__ = [
    "sphere_area", "RadialMollifier", "build_radial_mollifier", "export_mollifier",
    "import_mollifier", "moment_residuals", "SmoothingKernel", "KernelDensity",
    "PulledBackDensity", "WindowDensity", "kernel_order_test", "pullback_kernel",
    "kernel_growth_probe",
]

MAX_CONDITION = 1e12
MAX_ORDER = 12


def sphere_area(n):
    """Area ``omega_n = 2 pi^(n/2) / Gamma(n/2)`` of the unit sphere in ``R^n``."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _smooth_drop(t):
    """``1 - S(t)`` where ``S`` integrates the uniform quadratic B-spline on [0, 3]."""
    t = np.clip(t, 0.0, 3.0)
    S = np.where(t < 1.0, t ** 3 / 6.0,
                 np.where(t < 2.0, 0.5 - t ** 3 / 3.0 + 1.5 * t ** 2 - 1.5 * t,
                          1.0 - (3.0 - t) ** 3 / 6.0))
    return 1.0 - S


@dataclass(frozen=True)
class RadialMollifier:
    dim: int
    order: int
    s_max: float
    plateau: float
    coefficients: np.ndarray = field(repr=False)

    @property
    def a(self):
        return self.plateau * self.s_max

    @property
    def breakpoints(self):
        """Breakpoints of the piecewise-polynomial profile in ``s``."""
        a, d = self.a, (self.s_max - self.a) / 3.0
        return np.array([0.0, a, a + d, a + 2 * d, self.s_max])

    @property
    def radius(self):
        """Support radius ``r_phi = s_max^(1/n)`` of the bump on ``R^n``."""
        return self.s_max ** (1.0 / self.dim)

    def bump(self, s):
        s = np.asarray(s, dtype=float)
        d = (self.s_max - self.a) / 3.0
        return np.where(s >= self.s_max, 0.0, _smooth_drop((s - self.a) / d))

    def basis(self, s):
        """Basis ``[1, z^3 L_0(2z-1), ..., z^3 L_q(2z-1)]`` with ``z = (r-r_a)_+ / (r_phi-r_a)``.

        Here ``r = s^(1/n)`` and ``r_a = a^(1/n)``. ``L_k`` are Legendre
        polynomials; the ``z^3`` factor keeps the profile C^2 where the plateau
        ends.
        """
        s = np.asarray(s, dtype=float)
        ra = self.a ** (1.0 / self.dim)
        z = np.maximum(s ** (1.0 / self.dim) - ra, 0.0) / (self.radius - ra)
        leg = legendre.legvander(2 * z - 1, self.order).reshape(s.shape + (self.order + 1,))
        return np.concatenate([np.ones_like(s)[..., None], z[..., None] ** 3 * leg], axis=-1)

    def profile(self, s):
        """``phi1(s)``; zero for ``s >= s_max``."""
        return self.bump(s) * (self.basis(s) @ self.coefficients)

    def __call__(self, z):
        """``phi(z) = phi1(|z|^n)`` for points ``z`` of shape ``(..., n)``."""
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        return self.profile(r ** self.dim)


def _radial_rule(breaks_s, n, degree):
    """Gauss-Legendre nodes in ``r = s^(1/n)`` exact for polynomials of ``degree`` in r."""
    m = max(4, degree // 2 + 2)
    r_nodes, r_w = piecewise_gauss_legendre(np.asarray(breaks_s) ** (1.0 / n), m)
    return r_nodes, r_w


def _moment_matrix(moll: RadialMollifier, q, rows="monomial"):
    """Matrix of ``int p_j(r) bump(s) basis_i(s) ds`` with ``r = s^(1/n)``.

    ``rows="monomial"`` uses ``p_j = r^j`` (the moments themselves);
    ``rows="legendre"`` uses ``L_j(2 r / r_phi - 1)``, an equivalent but far
    better conditioned set of constraints.
    """
    n = moll.dim
    r, w = _radial_rule(moll.breakpoints, n, q + n + n * (moll.order + 6) + 4)
    s = r ** n
    base = moll.bump(s)[:, None] * moll.basis(s)          # [node, i]
    jac = n * r ** (n - 1) * w                            # ds = n r^(n-1) dr
    if rows == "monomial":
        P = r[None, :] ** np.arange(q + 1)[:, None]       # s^(j/n) = r^j
    else:
        P = legendre.legvander(2 * r / moll.radius - 1, q).T
    return (P * jac) @ base


def build_radial_mollifier(n, q, s_max=1.0, plateau=0.1):
    """Solve the moment system for an order-``q`` radial profile on ``R^n``.

    Raises :class:`IllConditionedError` when the moment matrix has condition
    number above ``1e12`` (lower ``q`` in that case).
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if not 0 <= q <= MAX_ORDER:
        raise IllConditionedError(f"order {q} outside 0..{MAX_ORDER}; lower q")
    if not s_max > 0 or not 0 < plateau < 1:
        raise ValueError("need s_max > 0 and 0 < plateau < 1")
    proto = RadialMollifier(n, q, float(s_max), float(plateau), np.zeros(q + 2))
    M = _moment_matrix(proto, q, rows="legendre")
    cond = np.linalg.cond(M)
    if not cond < MAX_CONDITION:
        raise IllConditionedError(f"moment matrix condition number {cond:.3g} exceeds 1e12; lower q")
    # row j constrains int L_j(2r/r_phi - 1) phi1 ds = L_j(-1) n / omega_n
    rhs = legendre.legvander(np.array([-1.0]), q)[0] * (n / sphere_area(n))
    # minimum-norm solution through the QR factorization of M^T
    Q, R = np.linalg.qr(M.T)
    c = Q @ np.linalg.solve(R.T, rhs)
    for _ in range(2):                      # iterative refinement
        c = c + Q @ np.linalg.solve(R.T, rhs - M @ c)
    # residual relative to the size of the terms being summed
    resid = np.max(np.abs(M @ c - rhs)) / max(1.0, np.max(np.abs(M) @ np.abs(c)))
    if resid > 1e-12:
        raise IllConditionedError(f"moment system residual {resid:.3g} above 1e-12; lower q")
    return RadialMollifier(n, q, float(s_max), float(plateau), c)


def moment_residuals(moll: RadialMollifier, oracle=True):
    """Moment residuals ``m_j - target_j`` for ``j = 0..q``.

    With ``oracle=True`` the moments come from adaptive quadrature in ``s``
    (split at the profile breakpoints), independent of the solver's matrix.
    """
    n, q = moll.dim, moll.order
    target = np.zeros(q + 1)
    target[0] = n / sphere_area(n)
    if not oracle:
        return _moment_matrix(moll, q) @ moll.coefficients - target
    br = moll.breakpoints
    out = np.empty(q + 1)
    with warnings.catch_warnings():
        # quad flags roundoff when a panel integral cancels to near zero;
        # the absolute accuracy is still far below the moment tolerance.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for j in range(q + 1):
            total = 0.0
            for lo, hi in zip(br[:-1], br[1:]):
                val, _ = integrate.quad(lambda s: s ** (j / n) * moll.profile(s), lo, hi,
                                        epsabs=1e-15, epsrel=1e-13, limit=200)
                total += val
            out[j] = total
    return out - target


def export_mollifier(moll: RadialMollifier) -> str:
    """Plain-text export with 17 significant digits (exact round trip)."""
    fmt = "%.17g"
    lines = [
        "# radial mollifier: phi1(s) = bump(s) * P(s)",
        "# P(s) = c0 + sum_k c_(k+1) z^3 L_k(2z - 1), z = (r - r_a)_+ / (r_phi - r_a), r = s^(1/n), a = plateau * s_max",
        f"dim {moll.dim}",
        f"order {moll.order}",
        f"s_max {fmt % moll.s_max}",
        f"plateau {fmt % moll.plateau}",
        "breakpoints " + " ".join(fmt % b for b in moll.breakpoints),
        "coefficients " + " ".join(fmt % c for c in moll.coefficients),
    ]
    return "\n".join(lines) + "\n"


def import_mollifier(text) -> RadialMollifier:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *vals = line.split()
        fields[key] = (vals, lineno)
    try:
        n = int(fields["dim"][0][0])
        q = int(fields["order"][0][0])
        s_max = float(fields["s_max"][0][0])
        plateau = float(fields["plateau"][0][0])
        coeffs = np.array([float(v) for v in fields["coefficients"][0]])
    except (KeyError, IndexError, ValueError) as err:
        raise ParseError(f"malformed mollifier file: {err}") from err
    if coeffs.size != q + 2:
        raise ParseError(f"expected {q + 2} coefficients, found {coeffs.size}",
                         fields["coefficients"][1], 1)
    moll = RadialMollifier(n, q, s_max, plateau, coeffs)
    if "breakpoints" in fields:
        br = np.array([float(v) for v in fields["breakpoints"][0]])
        if br.shape != moll.breakpoints.shape or np.any(br != moll.breakpoints):
            raise ParseError("breakpoints do not match dim/s_max/plateau", fields["breakpoints"][1], 1)
    return moll


# ---------------------------------------------------------------------------
# smoothing kernels and densities

class SmoothingKernel:
    """Translation-scale family ``Phi(eps, x)(y) = eps^-n phi((y - x) / eps)``.

    Quadrature against ``Phi(eps, x)`` uses polar nodes: Gauss-Legendre in
    the radius on each polynomial piece and a sphere rule for directions.
    The node weights include the kernel values, so discrete moments of the
    kernel are exact up to rounding.
    """

    def __init__(self, mollifier: RadialMollifier, radial_nodes=24, angular_nodes=24):
        self.mollifier = mollifier
        self.dim = mollifier.dim
        n = self.dim
        r, wr = piecewise_gauss_legendre(mollifier.breakpoints ** (1.0 / n), radial_nodes)
        dirs, wd = sphere_rule(n, angular_nodes)
        phi_r = mollifier.profile(r ** n)
        self.unit_points = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        self.unit_weights = ((wr * phi_r * r ** (n - 1))[:, None] * wd[None, :]).ravel()
        keep = self.unit_weights != 0.0
        self.unit_points = self.unit_points[keep]
        self.unit_weights = self.unit_weights[keep]
        self.radial_breaks = mollifier.breakpoints ** (1.0 / n)

    @property
    def order(self):
        return self.mollifier.order

    @property
    def radius(self):
        return self.mollifier.radius

    def support_radius(self, eps):
        return eps * self.radius

    def eval(self, eps, x, y):
        z = (np.asarray(y, dtype=float) - np.asarray(x, dtype=float)) / eps
        return self.mollifier(z) / eps ** self.dim

    def density(self, eps, x):
        return KernelDensity(self, float(eps), np.asarray(x, dtype=float))

    def nodes(self, eps, x):
        x = np.asarray(x, dtype=float)
        return x + eps * self.unit_points, self.unit_weights.copy()


class Density:
    """An n-form coefficient with a quadrature rule.

    Interface: ``__call__(y)``, ``nodes() -> (points, weights)`` where the
    weights already include the density, ``support -> (center, radius)``
    and ``line_breakpoints(x, k)``.
    """

    def check_inside(self, manifold):
        c, rad = self.support
        if np.any(c - rad <= manifold.lo) or np.any(c + rad >= manifold.hi):
            raise SupportError(f"support ball (center {c}, radius {rad:.4g}) leaves the chart domain")

    def mass(self):
        return float(np.sum(self.nodes()[1]))


@dataclass
class KernelDensity(Density):
    kernel: SmoothingKernel
    eps: float
    center: np.ndarray

    def __call__(self, y):
        return self.kernel.eval(self.eps, self.center, y)

    def nodes(self):
        return self.kernel.nodes(self.eps, self.center)

    @property
    def support(self):
        return self.center, self.kernel.support_radius(self.eps)

    def level(self, y):
        return np.linalg.norm(np.asarray(y, dtype=float) - self.center, axis=-1) / self.eps

    @property
    def levels(self):
        return self.kernel.radial_breaks[1:]

    def line_breakpoints(self, x, k):
        """Parameters ``t`` where ``x + t e_k`` crosses a radial breakpoint."""
        d = np.asarray(x, dtype=float) - self.center
        rest = float(d @ d - d[k] ** 2)
        out = []
        for rho in self.levels * self.eps:
            disc = rho * rho - rest
            if disc > 0:
                sq = math.sqrt(disc)
                out += [-d[k] - sq, -d[k] + sq]
        return np.array(sorted(out))


@dataclass
class PulledBackDensity(Density):
    """``mu^* D``: value ``D(mu(q)) |det D mu(q)|``; nodes ``mu^-1`` of the base nodes."""

    base: Density
    mu: object

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self.base(self.mu(q)) * np.abs(np.linalg.det(self.mu.jacobian(q)))

    def nodes(self):
        pts, w = self.base.nodes()
        return self.mu.inverse(pts), w

    @property
    def support(self):
        c, rad = self.base.support
        dirs, _ = sphere_rule(len(c), 32)
        ring = self.mu.inverse(c + rad * dirs)
        cc = self.mu.inverse(c)
        return cc, float(np.max(np.linalg.norm(ring - cc, axis=-1))) * 1.05

    def level(self, y):
        return self.base.level(self.mu(np.asarray(y, dtype=float)))

    @property
    def levels(self):
        return self.base.levels

    def line_breakpoints(self, x, k, samples=64):
        x = np.asarray(x, dtype=float)
        c, rad = self.support
        dist = float(np.linalg.norm(np.delete(x - c, k)))
        if dist >= rad:
            return np.array([])
        half = math.sqrt(rad * rad - dist * dist)
        ts = np.linspace(c[k] - x[k] - half, c[k] - x[k] + half, samples)
        e = np.zeros_like(x)
        e[k] = 1.0
        lv = self.level(x + ts[:, None] * e)
        out = []
        for L in self.levels:
            f = lv - L
            for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
                out.append(optimize.brentq(lambda t: float(self.level(x + t * e) - L),
                                           ts[i], ts[i + 1], xtol=1e-15))
        return np.array(sorted(out))


class WindowDensity(Density):
    """``f(y) * prod_i (1 - t_i^2)^power`` on the box ``[lo, hi]`` (``t_i`` in [-1, 1]).

    ``f`` is a callable on points ``(..., n)`` or ``None`` for 1. Quadrature
    is tensor-product Gauss-Legendre with ``panels`` panels per axis.
    """

    def __init__(self, lo, hi, f=None, power=4, nodes=24, panels=2):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.f = f
        self.power = power
        self.m = nodes
        self.panels = panels

    def window(self, y):
        y = np.asarray(y, dtype=float)
        t = (2 * y - self.lo - self.hi) / (self.hi - self.lo)
        inside = np.all(np.abs(t) < 1, axis=-1)
        return np.where(inside, np.prod(np.clip(1 - t * t, 0, None) ** self.power, axis=-1), 0.0)

    def __call__(self, y):
        w = self.window(y)
        return w if self.f is None else w * self.f(np.asarray(y, dtype=float))

    def nodes(self):
        pts, w = tensor_gauss_legendre(self.lo, self.hi, self.m, self.panels)
        return pts, w * self(pts)

    def refined(self):
        return WindowDensity(self.lo, self.hi, self.f, self.power, self.m, 2 * self.panels)

    @property
    def support(self):
        return 0.5 * (self.lo + self.hi), 0.5 * float(np.linalg.norm(self.hi - self.lo))

    def line_breakpoints(self, x, k):
        x = np.asarray(x, dtype=float)
        others = np.delete(np.arange(len(x)), k)
        if np.any(x[others] <= self.lo[others]) or np.any(x[others] >= self.hi[others]):
            return np.array([])
        edges = [self.lo[k] - x[k], self.hi[k] - x[k]]
        for p in range(1, self.panels):
            edges.append(self.lo[k] + (self.hi[k] - self.lo[k]) * p / self.panels - x[k])
        return np.array(sorted(edges))


# ---------------------------------------------------------------------------

def pullback_kernel(mu, kernel: SmoothingKernel, eps, p, manifold=None):
    """``(mu^* Phi)(eps, p) = mu^*(Phi(eps, mu(p)))`` as a density."""
    p = np.asarray(p, dtype=float)
    base = kernel.density(eps, mu(p))
    if manifold is not None:
        base.check_inside(manifold)
    return PulledBackDensity(base, mu)


def kernel_order_test(kernel: SmoothingKernel, f, x, eps_grid, floor=1e-13):
    """Fitted order of ``|f(x) - int f Phi(eps, x)|`` in ``eps``.

    ``f`` is a callable on points. Returns ``(fit, errors)``; ``fit.at_floor``
    signals that the error stayed below the quadrature noise floor
    ("order >= grid limit").
    """
    x = np.asarray(x, dtype=float)
    fx = float(f(x[None])[0])
    errs = []
    for eps in eps_grid:
        pts, w = kernel.nodes(eps, x)
        errs.append(abs(fx - float(np.sum(w * f(pts)))))
    errs = np.array(errs)
    return fit_slope(eps_grid, errs, floor), errs


def kernel_growth_probe(kernel: SmoothingKernel, m, ell, points, eps_grid, field=None,
                        rng=None, samples=400):
    """Measured exponent ``e`` in ``sup |D Phi(eps, x)(y)| ~ eps^-e``.

    ``m`` counts coordinate derivatives in ``y``; ``ell`` counts combined
    derivatives ``zeta(x).grad_x + zeta(y).grad_y + div zeta(y)`` (the Lie
    derivative of the n-form family along a field acting on both slots).
    ``field`` maps points to vectors (defaults to ``zeta(z) = 1 + z_0^2`` in
    every component); derivatives use central differences with steps
    proportional to ``eps``. The sup runs over ``points`` and ``samples``
    random ``y`` in the support.
    """
    if m + ell > 4:
        raise ValueError("derivative orders m + ell must not exceed 4")
    n = kernel.dim
    rng = np.random.default_rng(0) if rng is None else rng
    if field is None:
        def field(z):
            z = np.asarray(z, dtype=float)
            return np.repeat((1.0 + z[..., :1] ** 2), n, axis=-1)
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def div(z, h):
        acc = 0.0
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            acc = acc + (field(z + e)[..., i] - field(z - e)[..., i]) / (2 * h)
        return acc

    def apply(fun, order_y, order_c, h):
        """Nested central differences of ``fun(x, y)``."""
        if order_c:
            inner = apply(fun, order_y, order_c - 1, h)

            def g(x, y):
                zx, zy = field(x), field(y)
                plus = inner(x + h * zx, y + h * zy)
                minus = inner(x - h * zx, y - h * zy)
                return (plus - minus) / (2 * h) + div(y, h) * inner(x, y)
            return g
        if order_y:
            inner = apply(fun, order_y - 1, 0, h)

            def g(x, y):
                e = np.zeros(n)
                e[(order_y - 1) % n] = h
                return (inner(x, y + e) - inner(x, y - e)) / (2 * h)
            return g
        return fun

    sups = []
    for eps in eps_grid:
        h = 0.05 * eps
        D = apply(lambda x, y: kernel.eval(eps, x, y), m, ell, h)
        best = 0.0
        for x in points:
            dirs = rng.normal(size=(samples, n))
            dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
            rad = kernel.support_radius(eps) * rng.random((samples, 1)) ** (1.0 / n)
            y = x + rad * dirs
            best = max(best, float(np.max(np.abs(D(np.broadcast_to(x, y.shape), y)))))
        sups.append(best)
    sups = np.array(sups)
    fit = fit_slope(eps_grid, sups, floor=0.0)
    return -fit.slope, sups
