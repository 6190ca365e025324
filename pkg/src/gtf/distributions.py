"""Chart-local tensor distributions and their pairings with test objects.

A test object ``xi = u (x) omega`` couples a dual tensor field ``u`` with an
n-form coefficient ``omega`` (a :class:`~gtf.mollifiers.Density`). For a
distribution ``T`` of rank ``(r, s)`` the dual field ``u`` returns component
arrays whose axes match those of ``T``: the first ``r`` axes are covector
slots (paired with the contravariant slots of ``T``) and the last ``s`` axes
are vector slots. The pairing contracts all of these axes.

A test object may carry a batch of dual fields at once (``batch_shape``);
pairings then return an array of that shape. The embedding uses this to pair
a distribution with all dual basis elements in one pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from .errors import ParseError, RankError
from .geometry import FlowMap
from .mollifiers import PulledBackDensity
from .quadrature import piecewise_gauss_legendre
from .transport import TensorValue, tensor_map

__all__ = [
    "TestObject", "TensorDistribution", "Regular", "DeltaAt", "AxisPV", "Sum",
    "LieDerivative", "PulledBack", "pair", "pv_pair", "map_dual",
    "pullback_test", "parse_distribution", "load_distribution",
]

PV_NODES = 32
LIE_TAU = 1e-3


def map_dual(a, comps, r, s):
    """Apply ``a`` to the vector slots and ``(a^-1)^T`` to the covector slots of a dual tensor.

    ``comps`` has ``r`` covector axes followed by ``s`` vector axes (the dual
    of a rank ``(r, s)`` tensor); ``a`` broadcasts against the leading axes.
    """
    if r + s == 0:
        return np.asarray(comps, dtype=float)
    comps = np.asarray(comps, dtype=float)
    k = r + s
    perm = list(range(r, k)) + list(range(r))     # vector slots first for tensor_map
    lead = comps.ndim - k
    moved = np.transpose(comps, list(range(lead)) + [lead + j for j in perm])
    out = tensor_map(a, moved, s, r)
    lead = out.ndim - k
    return np.transpose(out, list(range(lead)) + [lead + j for j in np.argsort(perm)])


@dataclass
class TestObject:
    """``u (x) omega``: dual field ``u`` and density ``omega``.

    ``u`` maps points of shape ``(P, n)`` to ``(P, *batch_shape)`` followed by
    ``r + s`` axes of length ``n`` (or just ``(P, *batch_shape)`` for scalars).
    """

    u: Callable
    omega: object
    rank: tuple = (0, 0)
    batch_shape: tuple = ()

    __test__ = False   # not a pytest class

    def u_flat(self, q):
        """``u(q)`` reshaped to ``(P, B, N)`` with ``B`` the batch size."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        vals = np.asarray(self.u(q), dtype=float)
        P = q.shape[0]
        B = int(np.prod(self.batch_shape, dtype=int))
        return np.broadcast_to(vals, (P,) + vals.shape[1:]).reshape(P, B, -1)

    def shape_result(self, flat):
        flat = np.asarray(flat, dtype=float)
        if not self.batch_shape:
            return float(flat.reshape(-1)[0])
        return flat.reshape(self.batch_shape)

    def scaled(self, c):
        return TestObject(lambda q: c * np.asarray(self.u(q), dtype=float), self.omega, self.rank, self.batch_shape)

    @staticmethod
    def scalar(omega, f=None):
        """Rank ``(0, 0)`` test object ``f (x) omega`` (``f = 1`` by default)."""
        if f is None:
            return TestObject(lambda q: np.ones(np.shape(q)[:-1]), omega)
        return TestObject(f, omega)

    @staticmethod
    def constant(comps, omega, rank):
        """A dual field with constant components."""
        comps = np.asarray(comps, dtype=float)
        return TestObject(lambda q: np.broadcast_to(comps, np.shape(q)[:-1] + comps.shape), omega, rank)


def pullback_test(xi: TestObject, phi) -> TestObject:
    """``phi^* xi``: ``u'(q) = (D phi(q))^* u(phi(q))`` and ``omega' = phi^* omega``."""
    r, s = xi.rank
    nb = len(xi.batch_shape)

    def u(q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        vals = np.asarray(xi.u(phi(q)), dtype=float)
        if r + s == 0:
            return vals
        a = np.linalg.inv(phi.jacobian(q))
        a = a.reshape(a.shape[:1] + (1,) * nb + a.shape[1:])
        return map_dual(a, vals, r, s)

    return TestObject(u, PulledBackDensity(xi.omega, phi), xi.rank, xi.batch_shape)


class TensorDistribution:
    """Base class; subclasses implement :meth:`pair_flat` returning ``(B,)``."""

    rank: tuple
    dim: int

    def pair_flat(self, xi: TestObject) -> np.ndarray:
        raise NotImplementedError

    def pair(self, xi: TestObject):
        if tuple(xi.rank) != tuple(self.rank):
            raise RankError(f"test object of rank {tuple(xi.rank)} cannot be paired with a rank {self.rank} distribution")
        return xi.shape_result(self.pair_flat(xi))

    def __add__(self, other):
        return Sum([(1.0, self), (1.0, other)])

    def __rmul__(self, c):
        return Sum([(float(c), self)])

    def __sub__(self, other):
        return Sum([(1.0, self), (-1.0, other)])


def pair(T: TensorDistribution, xi: TestObject):
    """``<T, xi>``."""
    return T.pair(xi)


def _ncomp(dim, rank):
    return dim ** (rank[0] + rank[1])


@dataclass
class Regular(TensorDistribution):
    """A locally integrable field; ``field(q)`` gives components ``(P, N)`` or ``(P, n, ..., n)``."""

    field: Callable
    rank: tuple
    dim: int
    source: Optional[tuple] = None

    @classmethod
    def from_exprs(cls, exprs, rank, dim):
        exprs = [ex.parse_expr(e) if isinstance(e, str) else e for e in exprs]
        if len(exprs) != _ncomp(dim, rank):
            raise RankError(f"rank {tuple(rank)} in dimension {dim} needs {_ncomp(dim, rank)} components, got {len(exprs)}")
        f = ex.compile_exprs(exprs)
        return cls(f, tuple(rank), dim, tuple(exprs))

    @classmethod
    def constant(cls, comps, rank):
        comps = np.asarray(comps, dtype=float).ravel()
        dim = round(comps.size ** (1.0 / max(1, sum(rank)))) if sum(rank) else None
        return cls(lambda q: np.broadcast_to(comps, np.shape(q)[:-1] + comps.shape), tuple(rank), dim)

    def values(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return np.asarray(self.field(q), dtype=float).reshape(q.shape[0], -1)

    def pair_flat(self, xi):
        pts, w = xi.omega.nodes()
        return np.einsum("p,pn,pbn->b", w, self.values(pts), xi.u_flat(pts))


@dataclass
class DeltaAt(TensorDistribution):
    """``c delta_p``: ``<T, u (x) omega> = (c . u(p)) omega(p)``."""

    point: np.ndarray
    value: TensorValue

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.dim = self.point.size

    @property
    def rank(self):
        return self.value.rank

    def pair_flat(self, xi):
        p = self.point[None]
        om = float(np.asarray(xi.omega(p)).reshape(-1)[0])
        if om == 0.0:
            return np.zeros(xi.u_flat(p).shape[1])
        return np.einsum("n,bn->b", self.value.flat(), xi.u_flat(p)[0]) * om


@dataclass
class AxisPV(TensorDistribution):
    """``c (x) P`` with ``P`` the principal value ``sign t |t|^(n-2)`` along axis ``k`` through ``x``.

    In the other coordinate slots ``P`` acts as a delta at ``x``. The cutoff
    is a hard radius ``eta`` on the test side.
    """

    axis: int
    point: np.ndarray
    eta: float
    value: Optional[TensorValue] = None
    nodes: int = PV_NODES

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.dim = self.point.size
        if not 0 <= self.axis < self.dim:
            raise ValueError(f"axis {self.axis} outside 0..{self.dim - 1}")
        if self.value is None:
            self.value = TensorValue(0, 0, np.array(1.0))

    @property
    def rank(self):
        return self.value.rank

    def line(self, t):
        e = np.zeros(self.dim)
        e[self.axis] = 1.0
        return self.point + np.asarray(t, dtype=float)[:, None] * e

    def panels(self, omega):
        """Panel breaks on ``[0, eta]`` at ``|t|`` of the density's kinks on both half-lines."""
        br = [0.0, self.eta]
        lb = getattr(omega, "line_breakpoints", None)
        if lb is not None:
            for t in np.abs(np.asarray(lb(self.point, self.axis), dtype=float)):
                if 0.0 < t < self.eta:
                    br.append(float(t))
        br = np.unique(br)
        return br[np.concatenate([[True], np.diff(br) > 1e-14 * self.eta])]

    def pair_flat(self, xi):
        t, w = piecewise_gauss_legendre(self.panels(xi.omega), self.nodes)
        c = self.value.flat()

        def g(tt):
            pts = self.line(tt)
            return np.einsum("n,pbn->pb", c, xi.u_flat(pts)) * np.asarray(xi.omega(pts))[:, None]

        weight = w * t ** (self.dim - 2)
        return weight @ (g(t) - g(-t))


def pv_pair(P: AxisPV, omega, u=None):
    """Principal-value pairing of the scalar ``P`` with ``u * omega`` restricted to the axis line."""
    return P.pair(TestObject.scalar(omega, u))


@dataclass
class Sum(TensorDistribution):
    """``sum_i w_i T_i``."""

    terms: list
    rank_: Optional[tuple] = None

    def __post_init__(self):
        ranks = {tuple(T.rank) for _, T in self.terms}
        if self.rank_ is not None:
            ranks.add(tuple(self.rank_))
        if len(ranks) > 1:
            raise RankError(f"cannot add distributions of ranks {sorted(ranks)}")
        self.rank_ = ranks.pop() if ranks else (0, 0)
        dims = {getattr(T, "dim", None) for _, T in self.terms} - {None}
        self.dim = dims.pop() if len(dims) == 1 else None

    @property
    def rank(self):
        return self.rank_

    def pair_flat(self, xi):
        if not self.terms:
            return np.zeros(int(np.prod(xi.batch_shape, dtype=int)))
        return sum(w * T.pair_flat(xi) for w, T in self.terms)


@dataclass
class PulledBack(TensorDistribution):
    """``mu^* T`` with ``<mu^* T, xi> = <T, mu_* xi>`` and ``mu_* = (mu^-1)^*``."""

    base: TensorDistribution
    mu: object

    @property
    def rank(self):
        return self.base.rank

    @property
    def dim(self):
        return self.base.dim

    def pair_flat(self, xi):
        return self.base.pair_flat(pullback_test(xi, self.mu.inverted()))


@dataclass
class LieDerivative(TensorDistribution):
    """``L_X T = d/dtau (Fl_tau)^* T`` at 0, paired as ``-d/dtau <T, Fl_tau^* xi>``.

    Central differences at ``tau`` and ``tau / 2`` combined by one
    Richardson step.
    """

    base: TensorDistribution
    X: object
    tau: float = LIE_TAU
    step: float = 1e-3
    manifold: object = field(default=None, repr=False)

    @property
    def rank(self):
        return self.base.rank

    @property
    def dim(self):
        return self.base.dim

    def _at(self, t, xi):
        return self.base.pair_flat(pullback_test(xi, FlowMap(self.X, t, self.step, self.manifold)))

    def pair_flat(self, xi):
        def D(t):
            return (self._at(t, xi) - self._at(-t, xi)) / (2 * t)
        return -(4 * D(self.tau / 2) - D(self.tau)) / 3


# ---------------------------------------------------------------------------
# distribution-definition files

_BRACKET = re.compile(r"\[([^\[\]]*)\]")
_RANK = re.compile(r"^(\d+),(\d+)$")


def _const(text, line, col):
    try:
        e = ex.parse_expr(text)
    except ParseError as err:
        raise ParseError(f"bad number {text!r}: {err.args[0]}", line, col) from err
    if ex.max_variable(e) >= 0:
        raise ParseError(f"constant expected, got {text!r}", line, col)
    return float(ex.compile_expr(e)(np.zeros(1)))


def _fields(rest, line, col0):
    """Split into bracket groups and bare words, keeping columns."""
    out = []
    pos = 0
    while pos < len(rest):
        ch = rest[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == "[":
            m = _BRACKET.match(rest, pos)
            if m is None:
                raise ParseError("unbalanced '['", line, col0 + pos)
            out.append(("list", m.group(1), col0 + pos))
            pos = m.end()
        else:
            end = pos
            while end < len(rest) and not rest[end].isspace() and rest[end] != "[":
                end += 1
            out.append(("word", rest[pos:end], col0 + pos))
            pos = end
    return out


def _items(text):
    return [t.strip() for t in text.split(",")] if text.strip() else []


def _rank(tok, line):
    kind, text, col = tok
    m = _RANK.match(text) if kind == "word" else None
    if m is None:
        raise ParseError(f"rank must look like r,s (got {text!r})", line, col)
    return int(m.group(1)), int(m.group(2))


def _expect(toks, i, kind, what, line, end_col):
    if i >= len(toks) or toks[i][0] != kind:
        col = toks[i][2] if i < len(toks) else end_col
        raise ParseError(f"expected {what}", line, col)
    return toks[i]


def _point(tok, dim, line):
    vals = [_const(t, line, tok[2]) for t in _items(tok[1])]
    if len(vals) != dim:
        raise ParseError(f"point needs {dim} coordinates, got {len(vals)}", line, tok[2])
    return np.array(vals)


def _tensor(tok, rank, dim, line):
    vals = [_const(t, line, tok[2]) for t in _items(tok[1])]
    if len(vals) != _ncomp(dim, rank):
        raise ParseError(f"rank {rank} needs {_ncomp(dim, rank)} components, got {len(vals)}", line, tok[2])
    return TensorValue(rank[0], rank[1], np.array(vals).reshape((dim,) * sum(rank)))


def parse_distribution(text, dim):
    """Parse a distribution-definition file; returns ``(result, named)``.

    One definition per line, optionally named with ``name =``::

        regular <r,s> [<expr>, ...]            # n^(r+s) components, contravariant first
        delta <r,s> [<point>] [<components>]
        axispv <k> [<point>] <eta> [<r,s> [<components>]]   # k is 1-based
        sum <weight> <name> [<weight> <name> ...]

    The last definition is the result.
    """
    named = {}
    last = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        name = None
        col0 = 1
        m = re.match(r"\s*([A-Za-z_]\w*)\s*=(?!=)", body)
        if m:
            name = m.group(1)
            col0 = m.end() + 1
            body = body[m.end():]
        toks = _fields(body, lineno, col0)
        if not toks or toks[0][0] != "word":
            raise ParseError("expected a keyword (regular, delta, axispv, sum)", lineno, col0)
        kw = toks[0][1]
        end_col = col0 + len(body)
        if kw == "regular":
            rank = _rank(_expect(toks, 1, "word", "rank r,s", lineno, end_col), lineno)
            lst = _expect(toks, 2, "list", "[components]", lineno, end_col)
            try:
                exprs = [ex.parse_expr(t) for t in _items(lst[1])]
            except ParseError as err:
                raise ParseError(f"bad component: {err.args[0]}", lineno, lst[2]) from err
            for e in exprs:
                if ex.max_variable(e) >= dim:
                    raise ParseError(f"component {ex.to_source(e)} uses a coordinate beyond dim {dim}", lineno, lst[2])
            if len(exprs) != _ncomp(dim, rank):
                raise ParseError(f"rank {rank} needs {_ncomp(dim, rank)} components, got {len(exprs)}", lineno, lst[2])
            T = Regular.from_exprs(exprs, rank, dim)
            used = 3
        elif kw == "delta":
            rank = _rank(_expect(toks, 1, "word", "rank r,s", lineno, end_col), lineno)
            p = _point(_expect(toks, 2, "list", "[point]", lineno, end_col), dim, lineno)
            c = _tensor(_expect(toks, 3, "list", "[components]", lineno, end_col), rank, dim, lineno)
            T = DeltaAt(p, c)
            used = 4
        elif kw == "axispv":
            ktok = _expect(toks, 1, "word", "axis index", lineno, end_col)
            if not ktok[1].isdigit() or not 1 <= int(ktok[1]) <= dim:
                raise ParseError(f"axis index must be in 1..{dim}", lineno, ktok[2])
            p = _point(_expect(toks, 2, "list", "[point]", lineno, end_col), dim, lineno)
            etok = _expect(toks, 3, "word", "cutoff radius", lineno, end_col)
            eta = _const(etok[1], lineno, etok[2])
            if not eta > 0:
                raise ParseError("cutoff radius must be positive", lineno, etok[2])
            value = None
            used = 4
            if len(toks) > 4:
                rank = _rank(toks[4], lineno)
                value = _tensor(_expect(toks, 5, "list", "[components]", lineno, end_col), rank, dim, lineno)
                used = 6
            T = AxisPV(int(ktok[1]) - 1, p, eta, value)
        elif kw == "sum":
            terms = []
            i = 1
            while i < len(toks):
                wtok = _expect(toks, i, "word", "weight", lineno, end_col)
                rtok = _expect(toks, i + 1, "word", "name", lineno, end_col)
                if rtok[1] not in named:
                    raise ParseError(f"unknown name {rtok[1]!r}", lineno, rtok[2])
                terms.append((_const(wtok[1], lineno, wtok[2]), named[rtok[1]]))
                i += 2
            if not terms:
                raise ParseError("sum needs at least one term", lineno, end_col)
            try:
                T = Sum(terms)
            except RankError as err:
                raise ParseError(str(err), lineno, toks[0][2]) from err
            used = len(toks)
        else:
            raise ParseError(f"unknown keyword {kw!r}", lineno, toks[0][2])
        if len(toks) > used:
            raise ParseError(f"unexpected {toks[used][1]!r}", lineno, toks[used][2])
        if name is not None:
            named[name] = T
        last = T
    if last is None:
        raise ParseError("no distribution defined", 1, 1)
    return last, named


def load_distribution(path, dim):
    with open(path, encoding="utf-8") as fh:
        return parse_distribution(fh.read(), dim)[0]
