"""Chart manifolds, Christoffel symbols, vector fields, diffeomorphisms and flows.

Array conventions used throughout the package:

* points are arrays of shape ``(..., n)``;
* ``Gamma[..., k, i, j]`` is the Christoffel symbol so that
  ``Gamma(x)(a, b)^k = sum_ij Gamma[k, i, j] a^i b^j``;
* ``jacobian[..., k, i] = d X^k / d x^i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, partial
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from . import expr as ex
from .errors import (
    DimensionError, DomainExitError, MetricError, ParseError, StepLimitError,
)

__all__ = [
    "ChartManifold", "ManifoldDoc", "parse_manifold", "parse_manifold_doc",
    "format_manifold", "christoffel_from_metric", "christoffel_derivative",
    "gamma_apply", "VectorFieldExpr", "Diffeo", "DiffeoExpr", "FlowMap",
    "flow", "flow_with_jacobian", "random_polynomial_manifold",
]

METRIC_FD_STEP = 1e-5
GAMMA_FD_STEP = 1e-4
MAX_METRIC_CONDITION = 1e12


def gamma_apply(G, a, b):
    """Evaluate the bilinear map ``Gamma(a, b)`` with broadcasting."""
    return np.einsum("...kij,...i,...j->...k", G, a, b)


def _fd_steps(x, h):
    return h * np.maximum(1.0, np.abs(x))


def christoffel_from_metric(g, x, h=METRIC_FD_STEP, check=True):
    """Levi-Civita Christoffel symbols of ``g`` at ``x`` by central differences.

    ``g`` maps points ``(..., n)`` to matrices ``(..., n, n)``. The step for
    coordinate ``l`` is ``h * max(1, |x_l|)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    gx = g(x)
    steps = _fd_steps(x, h)
    dg = np.empty(x.shape[:-1] + (n, n, n))  # [..., l, i, j] = d_l g_ij
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        hl = steps[..., l]
        dx = hl[..., None] * e
        dg[..., l, :, :] = (g(x + dx) - g(x - dx)) / (2.0 * hl[..., None, None])
    if check:
        if not np.all(np.isfinite(gx)):
            raise MetricError("metric is not finite")
        cond = np.linalg.cond(gx)
        if np.any(~np.isfinite(cond)) or np.any(cond > MAX_METRIC_CONDITION):
            raise MetricError(
                f"metric matrix is singular (condition number {np.max(cond):.3g})")
    ginv = np.linalg.inv(gx)
    # lower[..., l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lower = (np.moveaxis(dg, -1, -3)                       # d_i g_jl -> [l,i,j]
             + np.swapaxes(dg, -3, -1)                      # d_j g_il -> [l,i,j]
             - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lower)


def christoffel_derivative(christoffel, x, h=GAMMA_FD_STEP):
    """``dG[..., k, i, j, l] = d_l Gamma^k_ij`` by central differences."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    steps = _fd_steps(x, h)
    out = np.empty(x.shape[:-1] + (n, n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        hl = steps[..., l]
        dx = hl[..., None] * e
        out[..., l] = (christoffel(x + dx) - christoffel(x - dx)) / (2.0 * hl[..., None, None, None])
    return out


# ---------------------------------------------------------------------------
# manifold document (the parsed, printable form of a manifold file)

@dataclass(frozen=True)
class ManifoldDoc:
    dim: int
    domain: Optional[tuple] = None             # ((lo, hi), ...) as Expr
    metric: Optional[tuple] = None             # n x n tuple of Expr
    christoffel: tuple = ()                    # ((k, i, j, Expr), ...), 0-based


def _split_statements(tokens):
    stmts, cur, depth = [], [], 0
    for tok in tokens:
        if tok.kind == "eof":
            break
        if tok.kind == "op" and tok.text in "([":
            depth += 1
        elif tok.kind == "op" and tok.text in ")]":
            depth -= 1
        if depth <= 0 and (tok.kind == "nl" or (tok.kind == "op" and tok.text == ";")):
            if cur:
                stmts.append(cur)
            cur, depth = [], 0
            continue
        if tok.kind != "nl":
            cur.append(tok)
    if cur:
        stmts.append(cur)
    return stmts


def _stmt_parser(stmt):
    last = stmt[-1]
    eof = ex.Token("eof", "", last.line, last.col + len(last.text))
    return ex.Parser(stmt[1:] + [eof])


def _parse_int(p):
    tok = p.current
    if tok.kind != "num" or not float(tok.text).is_integer():
        raise p.error("expected an integer", tok)
    p.advance()
    return int(float(tok.text))


def _parse_matrix(p):
    p.expect("[")
    rows = []
    while True:
        p.expect("[")
        row = [p.expr()]
        while p.at(","):
            p.advance()
            row.append(p.expr())
        p.expect("]")
        rows.append(tuple(row))
        if p.at(","):
            p.advance()
            continue
        break
    p.expect("]")
    return tuple(rows)


def _const_value(e):
    return float(ex.compile_expr(e)(np.zeros(1)))


def parse_manifold_doc(text) -> ManifoldDoc:
    """Parse a manifold-definition document into its AST form."""
    tokens = ex.tokenize(text, keep_newlines=True)
    dim = None
    domain = metric = None
    chris = {}
    for stmt in _split_statements(tokens):
        head = stmt[0]
        p = _stmt_parser(stmt)
        if head.kind != "name":
            raise ParseError(f"expected a keyword, found {head.text!r}", head.line, head.col)
        if head.text == "dim":
            if dim is not None:
                raise ParseError("duplicate 'dim'", head.line, head.col)
            dim = _parse_int(p)
            if dim < 1:
                raise ParseError("dimension must be positive", head.line, head.col)
        elif head.text == "domain":
            bounds = []
            while p.current.kind != "eof":
                bounds.append(p.term())
            if len(bounds) % 2:
                raise DimensionError(f"line {head.line}: domain needs lo/hi pairs")
            domain = tuple((bounds[i], bounds[i + 1]) for i in range(0, len(bounds), 2))
        elif head.text == "metric":
            if metric is not None:
                raise ParseError("duplicate 'metric'", head.line, head.col)
            metric = _parse_matrix(p)
        elif head.text == "christoffel":
            k, i, j = _parse_int(p), _parse_int(p), _parse_int(p)
            e = p.expr()
            if (k, i, j) in chris:
                raise ParseError(f"duplicate christoffel entry {k} {i} {j}", head.line, head.col)
            chris[(k, i, j)] = (e, head)
        else:
            raise ParseError(f"unknown keyword {head.text!r}", head.line, head.col)
        if p.current.kind != "eof":
            raise p.error(f"unexpected {p.current.text!r}")
    if dim is None:
        raise ParseError("missing 'dim' statement", 1, 1)
    if metric is not None and chris:
        raise ParseError("give either 'metric' or 'christoffel' entries, not both", 1, 1)

    if domain is not None and len(domain) != dim:
        raise DimensionError(f"domain has {len(domain)} intervals for dim {dim}")
    if metric is not None:
        if len(metric) != dim or any(len(r) != dim for r in metric):
            raise DimensionError(f"metric is not {dim}x{dim}")
    entries = []
    for (k, i, j), (e, tok) in sorted(chris.items()):
        if not all(1 <= a <= dim for a in (k, i, j)):
            raise DimensionError(f"line {tok.line}: christoffel index out of range for dim {dim}")
        entries.append((k - 1, i - 1, j - 1, e))
    for e in _all_exprs(metric, entries):
        if ex.max_variable(e) >= dim:
            raise DimensionError(f"expression {ex.to_source(e)} uses a coordinate beyond dim {dim}")
    return ManifoldDoc(dim, domain, metric, tuple(entries))


def _all_exprs(metric, entries):
    if metric is not None:
        for row in metric:
            yield from row
    for *_, e in entries:
        yield e


def format_manifold(doc: ManifoldDoc) -> str:
    lines = [f"dim {doc.dim}"]
    if doc.domain is not None:
        lines.append("domain " + " ".join(
            f"{ex.to_source(lo)} {ex.to_source(hi)}" for lo, hi in doc.domain))
    if doc.metric is not None:
        rows = ", ".join("[" + ", ".join(ex.to_source(e) for e in row) + "]" for row in doc.metric)
        lines.append(f"metric [{rows}]")
    for k, i, j, e in doc.christoffel:
        lines.append(f"christoffel {k + 1} {i + 1} {j + 1} {ex.to_source(e)}")
    return "\n".join(lines) + "\n"


def parse_manifold(text, name="") -> "ChartManifold":
    """Parse a manifold-definition document into a :class:`ChartManifold`."""
    doc = parse_manifold_doc(text)
    return ChartManifold.from_doc(doc, name=name)


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChartManifold:
    """A single chart ``U' = (lo, hi)`` carrying Christoffel symbols.

    ``christoffel`` maps ``(..., n)`` to ``(..., n, n, n)``; ``metric`` (if
    present) maps ``(..., n)`` to ``(..., n, n)``.
    """

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    christoffel: Callable[[np.ndarray], np.ndarray]
    metric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    is_flat: bool = False
    name: str = ""
    doc: Optional[ManifoldDoc] = field(default=None, repr=False)
    kernel_factory: Optional[Callable] = field(default=None, repr=False)

    @cached_property
    def gamma_kernel(self):
        """Compiled pointwise Christoffel function for the RK4 kernels, or ``None``."""
        if self.kernel_factory is None or self.is_flat:
            return None
        return self.kernel_factory()

    @classmethod
    def from_doc(cls, doc: ManifoldDoc, name=""):
        n = doc.dim
        if doc.domain is None:
            lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
        else:
            lo = np.array([_const_value(a) for a, _ in doc.domain])
            hi = np.array([_const_value(b) for _, b in doc.domain])
            if np.any(lo >= hi):
                raise DimensionError("domain interval with lo >= hi")
        if doc.metric is not None:
            flat_exprs = [e for row in doc.metric for e in row]
            gfun = ex.compile_exprs(flat_exprs)
            metric = lambda x: gfun(x).reshape(np.shape(x)[:-1] + (n, n))  # noqa: E731
            _check_symmetric(metric, lo, hi, n)
            if all(isinstance(e, ex.Num) for e in flat_exprs):
                return cls.flat(n, lo, hi, metric=metric, name=name, doc=doc)
            chris = _exact_levi_civita(flat_exprs, n)
            factory = partial(_kernels.gamma_kernel_from_metric, n, flat_exprs)
            return cls(n, lo, hi, chris, metric, False, name, doc, factory)
        if not doc.christoffel:
            return cls.flat(n, lo, hi, name=name, doc=doc)
        exprs = [ex.Num(0.0)] * n ** 3
        for k, i, j, e in doc.christoffel:
            exprs[(k * n + i) * n + j] = e
        cfun = ex.compile_exprs(exprs)
        chris = lambda x: cfun(x).reshape(np.shape(x)[:-1] + (n, n, n))  # noqa: E731
        flat = all(isinstance(e, ex.Num) and e.value == 0.0 for e in exprs)
        factory = partial(_kernels.gamma_kernel_from_christoffel, n, doc.christoffel)
        return cls(n, lo, hi, chris, None, flat, name, doc, factory)

    @classmethod
    def from_metric(cls, metric, dim, lo=None, hi=None, name="", doc=None):
        lo, hi = _box(dim, lo, hi)
        chris = lambda x: christoffel_from_metric(metric, x, check=False)  # noqa: E731
        return cls(dim, lo, hi, chris, metric, False, name, doc)

    @classmethod
    def from_christoffel(cls, christoffel, dim, lo=None, hi=None, name=""):
        lo, hi = _box(dim, lo, hi)
        return cls(dim, lo, hi, christoffel, None, False, name)

    @classmethod
    def flat(cls, dim, lo=None, hi=None, metric=None, name="", doc=None):
        lo, hi = _box(dim, lo, hi)

        def chris(x):
            return np.zeros(np.shape(x)[:-1] + (dim, dim, dim))

        if metric is None:
            metric = lambda x: np.broadcast_to(np.eye(dim), np.shape(x)[:-1] + (dim, dim)).copy()  # noqa: E731
        return cls(dim, lo, hi, chris, metric, True, name, doc)

    def contains(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lo + margin) & (x < self.hi - margin), axis=-1)

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        return np.min(np.minimum(x - self.lo, self.hi - x), axis=-1)

    def gamma_derivative(self, x, h=GAMMA_FD_STEP):
        if self.is_flat:
            n = self.dim
            return np.zeros(np.shape(x)[:-1] + (n, n, n, n))
        return christoffel_derivative(self.christoffel, x, h)

    def sample(self, rng, count, margin=0.0, box=None):
        """Uniform random points in the domain (or in ``box``), shrunk by ``margin``."""
        lo, hi = (self.lo, self.hi) if box is None else box
        lo = np.where(np.isfinite(lo), lo, -1.0) + margin
        hi = np.where(np.isfinite(hi), hi, 1.0) - margin
        return lo + (hi - lo) * rng.random((count, self.dim))


def _exact_levi_civita(flat_exprs, n):
    """Christoffel symbols from metric expressions by exact AST differentiation."""
    derivs = [ex.differentiate(e, l) for l in range(n) for e in flat_exprs]
    fun = ex.compile_exprs(list(flat_exprs) + derivs)

    def chris(x):
        x = np.asarray(x, dtype=float)
        vals = fun(x)
        shape = x.shape[:-1]
        g = vals[..., :n * n].reshape(shape + (n, n))
        dg = vals[..., n * n:].reshape(shape + (n, n, n))   # [l, i, j] = d_l g_ij
        lower = np.moveaxis(dg, -1, -3) + np.swapaxes(dg, -3, -1) - dg
        return 0.5 * np.einsum("...kl,...lij->...kij", np.linalg.inv(g), lower)

    return chris


def _box(dim, lo, hi):
    lo = np.full(dim, -np.inf) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(dim, np.inf) if hi is None else np.asarray(hi, dtype=float)
    return lo, hi


def _check_symmetric(metric, lo, hi, n, samples=7):
    rng = np.random.default_rng(12345)
    a = np.where(np.isfinite(lo), lo, -1.0)
    b = np.where(np.isfinite(hi), hi, 1.0)
    pts = a + (b - a) * (0.05 + 0.9 * rng.random((samples, n)))
    g = metric(pts)
    asym = np.abs(g - np.swapaxes(g, -1, -2))
    scale = np.maximum(1.0, np.abs(g))
    if np.any(asym > 1e-12 * scale):
        raise MetricError("metric expression is not symmetric")


# ---------------------------------------------------------------------------
# vector fields

class VectorFieldExpr:
    """A vector field given by one expression per component.

    Derivatives are exact (symbolic) when every component is polynomial and
    nested central differences otherwise.
    """

    def __init__(self, components: Sequence, dim=None):
        comps = [ex.parse_expr(c) if isinstance(c, str) else c for c in components]
        self.dim = len(comps) if dim is None else dim
        if len(comps) != self.dim:
            raise DimensionError(f"vector field needs {self.dim} components, got {len(comps)}")
        for c in comps:
            if ex.max_variable(c) >= self.dim:
                raise DimensionError(f"component {ex.to_source(c)} uses a coordinate beyond dim {self.dim}")
        self.components = tuple(comps)
        self.exact = all(ex.is_polynomial(c) for c in comps)
        self._value = ex.compile_exprs(comps)
        n = self.dim
        if self.exact:
            d1 = [ex.differentiate(c, i) for c in comps for i in range(n)]
            d2 = [ex.differentiate(e, j) for e in d1 for j in range(n)]
            self._jac = ex.compile_exprs(d1)
            self._hess = ex.compile_exprs(d2)

    @classmethod
    def constant(cls, vec):
        return cls([ex.Num(float(v)) for v in vec])

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        return self._value(x)

    def jacobian(self, x, h=1e-4):
        x = np.asarray(x, dtype=float)
        n = self.dim
        if self.exact:
            return self._jac(x).reshape(x.shape[:-1] + (n, n))
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            out[..., :, i] = (self._value(x + e) - self._value(x - e)) / (2 * h)
        return out

    def second(self, x, h=1e-3):
        """``out[..., k, i, j] = d_i d_j X^k``."""
        x = np.asarray(x, dtype=float)
        n = self.dim
        if self.exact:
            return self._hess(x).reshape(x.shape[:-1] + (n, n, n))
        out = np.empty(x.shape[:-1] + (n, n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out[..., :, :, j] = (self.jacobian(x + e) - self.jacobian(x - e)) / (2 * h)
        return out

    def divergence(self, x):
        return np.trace(self.jacobian(x), axis1=-2, axis2=-1)

    def is_zero(self):
        return all(isinstance(c, ex.Num) and c.value == 0.0 for c in self.components)

    def __repr__(self):
        return "VectorFieldExpr([" + ", ".join(ex.to_source(c) for c in self.components) + "])"


# ---------------------------------------------------------------------------
# diffeomorphisms

class Diffeo:
    """Interface: ``__call__``, ``inverse``, ``jacobian`` (of the forward map)."""

    dim: int

    def __call__(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def inverse_jacobian(self, y):
        """Jacobian of the inverse map at ``y``."""
        return np.linalg.inv(self.jacobian(self.inverse(y)))

    def inverted(self) -> "Diffeo":
        return _Inverted(self)

    def roundtrip_error(self, points):
        pts = np.asarray(points, dtype=float)
        return float(np.max(np.abs(self(self.inverse(pts)) - pts)))


class _Inverted(Diffeo):
    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def __call__(self, x):
        return self.base.inverse(x)

    def inverse(self, y):
        return self.base(y)

    def jacobian(self, x):
        return self.base.inverse_jacobian(x)

    def inverse_jacobian(self, y):
        return self.base.jacobian(y)

    def inverted(self):
        return self.base


class DiffeoExpr(Diffeo):
    """Diffeomorphism given by forward and inverse component expressions."""

    def __init__(self, forward: Sequence, inverse: Sequence):
        self.forward_field = VectorFieldExpr(forward)
        self.inverse_field = VectorFieldExpr(inverse)
        self.dim = self.forward_field.dim
        if self.inverse_field.dim != self.dim:
            raise DimensionError("forward and inverse have different dimensions")

    @classmethod
    def translation(cls, c):
        names = _coord_names(len(c))
        fwd = [f"{v} + ({float(a)!r})" for v, a in zip(names, c)]
        inv = [f"{v} - ({float(a)!r})" for v, a in zip(names, c)]
        return cls(fwd, inv)

    @classmethod
    def scaling(cls, lam, n):
        names = _coord_names(n)
        return cls([f"({float(lam)!r}) * {v}" for v in names],
                   [f"{v} / ({float(lam)!r})" for v in names])

    @classmethod
    def identity(cls, n):
        names = _coord_names(n)
        return cls(names, names)

    def __call__(self, x):
        return self.forward_field.value(x)

    def inverse(self, y):
        return self.inverse_field.value(y)

    def jacobian(self, x):
        return self.forward_field.jacobian(x, h=1e-6)

    def inverse_jacobian(self, y):
        return self.inverse_field.jacobian(y, h=1e-6)

    def orientation_preserving(self, points) -> bool:
        return bool(np.all(np.linalg.det(self.jacobian(np.asarray(points, dtype=float))) > 0))


def _coord_names(n):
    return ["x", "y", "z"][:n] if n <= 3 else [f"x{i + 1}" for i in range(n)]


# ---------------------------------------------------------------------------
# flows

def flow_with_jacobian(X, t, x, step=1e-3, manifold=None, max_steps=10 ** 7):
    """RK4 integration of ``a' = X(a)`` and the variational equation.

    Returns ``(alpha(t, x), D alpha(t, x))``. Raises :class:`DomainExitError`
    if the trajectory leaves the manifold's chart.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    nsteps = max(1, int(math.ceil(abs(t) / step - 1e-9))) if t != 0 else 0
    if nsteps > max_steps:
        raise StepLimitError(f"flow needs {nsteps} steps (limit {max_steps})")
    J = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
    if nsteps == 0:
        return x.copy(), J
    h = t / nsteps
    a = x.copy()

    def rhs(a, J):
        return X.value(a), X.jacobian(a) @ J

    for i in range(nsteps):
        k1a, k1J = rhs(a, J)
        k2a, k2J = rhs(a + 0.5 * h * k1a, J + 0.5 * h * k1J)
        k3a, k3J = rhs(a + 0.5 * h * k2a, J + 0.5 * h * k2J)
        k4a, k4J = rhs(a + h * k3a, J + h * k3J)
        a = a + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        J = J + h / 6.0 * (k1J + 2 * k2J + 2 * k3J + k4J)
        if manifold is not None and not np.all(manifold.contains(a)):
            raise DomainExitError("flow left the chart domain", exit_time=(i + 1) * h)
    return a, J


def flow(X, t, x, step=1e-3, manifold=None, max_steps=10 ** 7):
    """Point ``alpha(t, x)`` of the local flow of ``X``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    nsteps = max(1, int(math.ceil(abs(t) / step - 1e-9))) if t != 0 else 0
    if nsteps > max_steps:
        raise StepLimitError(f"flow needs {nsteps} steps (limit {max_steps})")
    if nsteps == 0:
        return x.copy()
    h = t / nsteps
    a = x.copy()
    f = X.value
    for i in range(nsteps):
        k1 = f(a)
        k2 = f(a + 0.5 * h * k1)
        k3 = f(a + 0.5 * h * k2)
        k4 = f(a + h * k3)
        a = a + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if manifold is not None and not np.all(manifold.contains(a)):
            raise DomainExitError("flow left the chart domain", exit_time=(i + 1) * h)
    del n
    return a


class FlowMap(Diffeo):
    """The time-``tau`` flow of a vector field, as a :class:`Diffeo`."""

    def __init__(self, X, tau, step=1e-3, manifold=None):
        self.X = X
        self.tau = float(tau)
        self.step = step
        self.manifold = manifold
        self.dim = X.dim

    def __call__(self, x):
        return flow(self.X, self.tau, x, self.step, self.manifold)

    def inverse(self, y):
        return flow(self.X, -self.tau, y, self.step, self.manifold)

    def jacobian(self, x):
        return flow_with_jacobian(self.X, self.tau, x, self.step, self.manifold)[1]

    def inverse_jacobian(self, y):
        return flow_with_jacobian(self.X, -self.tau, y, self.step, self.manifold)[1]

    def inverted(self):
        return FlowMap(self.X, -self.tau, self.step, self.manifold)


def _monomials(n, degree):
    names = _coord_names(n)
    out = [()]
    for _ in range(degree):
        out = out + [m + (i,) for m in out if len(m) < degree for i in range(n) if not m or i >= m[-1]]
    seen, mons = set(), []
    for m in out:
        if m not in seen:
            seen.add(m)
            mons.append(m)
    return [("*".join(names[i] for i in m) if m else "1") for m in mons]


def random_polynomial_manifold(n, rng, degree=2, half_width=2.0, scale=1.0):
    """Chart ``(-half_width, half_width)^n`` with random symmetric polynomial Christoffels.

    Each ``Gamma^k_ij`` (``i <= j``) is a polynomial of total degree at most
    ``degree`` with coefficients drawn uniformly from ``[-scale, scale]``.
    """
    mons = _monomials(n, degree)
    lines = [f"dim {n}", "domain " + " ".join(f"{-half_width!r} {half_width!r}" for _ in range(n))]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                coef = rng.uniform(-scale, scale, len(mons))
                body = " + ".join(f"({float(c)!r})*{m}" for c, m in zip(coef, mons))
                lines.append(f"christoffel {k + 1} {i + 1} {j + 1} {body}")
                if i != j:
                    lines.append(f"christoffel {k + 1} {j + 1} {i + 1} {body}")
    return parse_manifold("\n".join(lines), name="random-polynomial")
