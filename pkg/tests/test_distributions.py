import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad, quad
from scipy.special import shichi

from gtf.distributions import (AxisPV, DeltaAt, LieDerivative, PulledBack, Regular, Sum, TestObject,
                               map_dual, parse_distribution, pullback_test)
from gtf.errors import ParseError, RankError
from gtf.geometry import DiffeoExpr, VectorFieldExpr
from gtf.mollifiers import WindowDensity
from gtf.transport import TensorValue, tensor_map

BOX = WindowDensity([-1, -1], [1, 1], f=lambda q: np.exp(q[..., 0]) * (1 + q[..., 1]), power=0)


def test_regular_pairing_matches_quad():
    T = Regular.from_exprs(["x*y", "1 + x^2"], (0, 1), 2)
    u = lambda q: np.stack([q[..., 1], np.ones(q.shape[:-1])], -1)
    xi = TestObject(u, BOX, (0, 1))
    f = lambda y, x: (x * y * y + 1 + x ** 2) * np.exp(x) * (1 + y)
    want, _ = dblquad(f, -1, 1, -1, 1, epsabs=1e-13)
    assert T.pair(xi) == pytest.approx(want, rel=1e-12)


def test_delta_pairing():
    D = DeltaAt([0.2, 0.3], TensorValue(0, 1, np.array([2.0, -1.0])))
    xi = TestObject(lambda q: np.stack([q[..., 0], q[..., 1] ** 2], -1), BOX, (0, 1))
    want = (2.0 * 0.2 - 0.09) * np.exp(0.2) * 1.3
    assert D.pair(xi) == pytest.approx(want, rel=1e-14)


def test_pv_one_dimension_is_shi():
    P = AxisPV(0, [0.0], 0.5)
    xi = TestObject.scalar(WindowDensity([-1], [1], f=lambda q: np.exp(q[..., 0]), power=0))
    assert P.pair(xi) == pytest.approx(2 * shichi(0.5)[0], rel=1e-13)


def test_pv_two_dimensions_line_integral():
    P = AxisPV(0, [0.0, 0.0], 0.5)
    want, _ = quad(lambda t: np.sign(t) * np.exp(t), -0.5, 0.5, points=[0])
    assert P.pair(TestObject.scalar(BOX)) == pytest.approx(want, rel=1e-13)


def test_pv_kills_even_functions():
    P = AxisPV(1, [0.0, 0.0], 0.4)
    even = WindowDensity([-1, -1], [1, 1], f=lambda q: np.cos(3 * q[..., 1]) + q[..., 0], power=0)
    assert abs(P.pair(TestObject.scalar(even))) < 1e-14


def test_rank_mismatch_rejected():
    T = Regular.from_exprs(["1", "0"], (0, 1), 2)
    with pytest.raises(RankError):
        T.pair(TestObject.scalar(BOX))
    with pytest.raises(RankError):
        Sum([(1.0, T), (1.0, DeltaAt([0, 0], TensorValue(0, 0, np.array(1.0))))])


def test_map_dual_preserves_full_contraction():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 2, 2)) + 2 * np.eye(2)
    T = rng.normal(size=(5, 2, 2, 2))        # rank (1,2): vector slot, then two covector slots
    u = rng.normal(size=(5, 2, 2, 2))        # dual: covector slot, then two vector slots
    lhs = np.einsum("pijk,pijk->p", tensor_map(a, T, 1, 2), map_dual(a, u, 1, 2))
    assert np.allclose(lhs, np.einsum("pijk,pijk->p", T, u), atol=1e-12)
    # a covector dual (vector slot only) moves with a itself
    v = rng.normal(size=(5, 2))
    assert np.allclose(map_dual(a, v, 0, 1), np.einsum("pij,pj->pi", a, v))


def test_pullback_by_translation():
    T = Regular.from_exprs(["x^2 + y"], (0, 0), 2)
    mu = DiffeoExpr.translation([0.1, -0.2])
    xi = TestObject.scalar(WindowDensity([-0.5, -0.5], [0.5, 0.5]))
    # (mu^* T)(x) = T(x + c)
    want = Regular.from_exprs(["(x + 0.1)^2 + y - 0.2"], (0, 0), 2).pair(xi)
    assert PulledBack(T, mu).pair(xi) == pytest.approx(want, rel=1e-12)


def test_lie_derivative_of_scalar_field():
    T = Regular.from_exprs(["x^2 * y"], (0, 0), 2)
    X = VectorFieldExpr(["y", "1"])
    xi = TestObject.scalar(WindowDensity([-0.5, -0.5], [0.5, 0.5]))
    want = Regular.from_exprs(["2*x*y*y + x^2"], (0, 0), 2).pair(xi)
    assert LieDerivative(T, X).pair(xi) == pytest.approx(want, rel=1e-9)


def test_parser_builds_linear_combinations():
    text = """# two named pieces
a = delta 0,0 [0.1, 0.2] [2]
b = regular 0,0 [x*y]
sum 2 a -0.5 b
"""
    T, named = parse_distribution(text, 2)
    xi = TestObject.scalar(BOX)
    assert set(named) == {"a", "b"}
    assert T.pair(xi) == pytest.approx(2 * named["a"].pair(xi) - 0.5 * named["b"].pair(xi))


@pytest.mark.parametrize("text,line,col", [
    ("regular 0,1 [1]", 1, 13),
    ("foo 1", 1, 1),
    ("delta 0,0 [0.1, 0.2] [1]\nsum 1 missing", 2, None),
])
def test_parser_errors(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_distribution(text, 2)
    assert info.value.line == line
    if col is not None:
        assert info.value.col == col


vals = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(vals, vals, vals)
def test_pairing_is_linear(a, b, c):
    T = Regular.from_exprs(["sin(x)", "y"], (0, 1), 2)
    D = DeltaAt([0.1, -0.3], TensorValue(0, 1, np.array([1.0, c])))
    u = lambda q: np.stack([np.ones(q.shape[:-1]), q[..., 0]], -1)
    xi = TestObject(u, BOX, (0, 1))
    combo = Sum([(a, T), (b, D)])
    assert combo.pair(xi) == pytest.approx(a * T.pair(xi) + b * D.pair(xi), rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(-0.5, 0.5))
def test_pv_of_even_test_function_vanishes(eta, shift):
    f = lambda q: np.cosh(q[..., 0]) * (2 + q[..., 1] + shift)
    omega = WindowDensity([-1, -1], [1, 1], f=f, power=0)
    assert abs(AxisPV(0, [0.0, 0.0], eta).pair(TestObject.scalar(omega))) < 1e-13


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_map_dual_roundtrip(entries):
    a = np.array([[1.5, 0.2], [-0.3, 1.1]])
    u = np.array(entries).reshape(2, 2)
    back = map_dual(np.linalg.inv(a), map_dual(a, u, 1, 1), 1, 1)
    assert np.allclose(back, u, atol=1e-12)
