import numpy as np
import pytest

from gtf.errors import DimensionError, MetricError, ParseError
from gtf.geometry import (ChartManifold, DiffeoExpr, VectorFieldExpr, christoffel_from_metric,
                          flow, flow_with_jacobian, format_manifold, parse_manifold,
                          parse_manifold_doc, random_polynomial_manifold)

HALF = "dim 2\ndomain -5 5 0.05 10\nmetric [[1/y^2,0],[0,1/y^2]]"


def half_plane_gamma(y):
    # Gamma^x_xy = Gamma^x_yx = -1/y, Gamma^y_xx = 1/y, Gamma^y_yy = -1/y
    G = np.zeros((2, 2, 2))
    G[0, 0, 1] = G[0, 1, 0] = -1 / y
    G[1, 0, 0] = 1 / y
    G[1, 1, 1] = -1 / y
    return G


def test_half_plane_christoffel_exact():
    M = parse_manifold(HALF)
    for y in (0.3, 1.0, 4.0):
        assert np.allclose(M.christoffel(np.array([0.2, y])), half_plane_gamma(y), atol=1e-14)


def test_sphere_christoffel():
    M = parse_manifold("dim 2\ndomain 0.1 3 -4 8\nmetric [[1,0],[0,sin(x)^2]]")
    th = 0.7
    G = M.christoffel(np.array([th, 0.3]))
    assert np.isclose(G[0, 1, 1], -np.sin(th) * np.cos(th))
    assert np.isclose(G[1, 0, 1], np.cos(th) / np.sin(th))
    assert np.isclose(G[1, 1, 0], np.cos(th) / np.sin(th))


def test_fd_christoffel_agrees_with_exact():
    M = parse_manifold(HALF)
    x = np.array([0.1, 0.8])
    G = christoffel_from_metric(M.metric, x)
    assert np.allclose(G, M.christoffel(x), atol=1e-6)


def test_flat_has_zero_christoffel():
    M = ChartManifold.flat(3, [-1] * 3, [1] * 3)
    assert M.is_flat
    assert np.all(M.christoffel(np.zeros(3)) == 0)


def test_manifold_text_roundtrip():
    doc = parse_manifold_doc(HALF)
    again = parse_manifold(format_manifold(doc))
    x = np.array([0.4, 1.7])
    assert np.allclose(again.christoffel(x), parse_manifold(HALF).christoffel(x))


@pytest.mark.parametrize("text,err", [
    ("dim 2\nmetric [[1,0],[0]]", (ParseError, DimensionError)),
    ("dim 2\ndomain 1 0 0 1\n", DimensionError),
    ("dim 2\nmetric [[1,x],[0,1]]", MetricError),
    ("dim two", ParseError),
])
def test_bad_manifold_files(text, err):
    with pytest.raises(err):
        parse_manifold(text)


def test_linear_flow_is_exponential():
    X = VectorFieldExpr(["-y", "x"])
    x0 = np.array([1.0, 0.0])
    t = 0.9
    got = flow(X, t, x0)
    assert np.allclose(got, [np.cos(t), np.sin(t)], atol=1e-10)
    y, J = flow_with_jacobian(X, t, x0)
    R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    assert np.allclose(J, R, atol=1e-10)


def test_vector_field_jacobian():
    X = VectorFieldExpr(["x^2*y", "sin(y)"])
    p = np.array([[0.5, 0.3]])
    J = X.jacobian(p)[0]
    assert np.allclose(J, [[2 * 0.5 * 0.3, 0.25], [0.0, np.cos(0.3)]], atol=1e-8)


def test_diffeo_roundtrip():
    mu = DiffeoExpr(["2*x + y", "y - 1"], ["(x - y - 1)/2", "y + 1"])
    pts = np.array([[0.1, 0.2], [1.0, -3.0]])
    assert mu.roundtrip_error(pts) < 1e-13
    assert np.allclose(mu.jacobian(pts[0]), [[2, 1], [0, 1]])


def test_random_polynomial_manifold_is_torsion_free():
    M = random_polynomial_manifold(2, np.random.default_rng(0))
    G = M.christoffel(np.array([0.3, -0.4]))
    assert np.allclose(G, np.swapaxes(G, -1, -2))
