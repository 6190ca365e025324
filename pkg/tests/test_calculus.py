import numpy as np
import pytest

from gtf.calculus import (commutator_residual, connection_mismatch_residual, homothety_commutation,
                          lie_generalized, second_order_fd, second_order_formula,
                          transported_lie_derivative)
from gtf.distributions import DeltaAt, Regular
from gtf.embedding import sigma_embed
from gtf.fitting import eps_grid
from gtf.geometry import ChartManifold, DiffeoExpr, VectorFieldExpr, gamma_apply, parse_manifold
from gtf.mollifiers import SmoothingKernel, build_radial_mollifier
from gtf.transport import TensorValue, TransportOperator

HALF = parse_manifold("dim 2\ndomain -5 5 0.05 10\nmetric [[1/y^2,0],[0,1/y^2]]")
FLAT = ChartManifold.flat(2, [-5, -5], [5, 5])
K0 = SmoothingKernel(build_radial_mollifier(2, 0))
K2 = SmoothingKernel(build_radial_mollifier(2, 2))
P = np.array([0.0, 1.0])


def test_transported_lie_derivative_first_order_formula():
    X = VectorFieldExpr(["x*y", "x^2 - y"])
    Z = np.array([0.5, 0.2])
    got = transported_lie_derivative(TransportOperator(HALF), X, Z, P, manifold=HALF)
    J = X.jacobian(P[None])[0]
    G = HALF.christoffel(P[None])
    want = -J @ Z - gamma_apply(G, X.value(P[None]), Z[None])[0]
    assert np.allclose(got, want, atol=1e-6)


@pytest.mark.parametrize("X", [["0", "1"], ["x*y", "x^2 - y"], ["1 + y^2", "x"]])
def test_second_order_formula_matches_fd(X):
    X = VectorFieldExpr(X)
    Y, Z = np.array([0.3, -0.7]), np.array([0.5, 0.2])
    fd = second_order_fd(TransportOperator(HALF), X, Y, Z, P, manifold=HALF)
    assert np.allclose(second_order_formula(HALF, X, Y, Z, P), fd, atol=1e-6)


def test_printed_variant_disagrees_with_fd():
    X = VectorFieldExpr(["0", "1"])
    Y = Z = np.array([1.0, 0.0])
    fd = second_order_fd(TransportOperator(HALF), X, Y, Z, P, manifold=HALF)
    printed = second_order_formula(HALF, X, Y, Z, P, variant="printed")
    assert np.max(np.abs(printed - fd)) > 0.1


def test_lie_of_sigma_is_classical_lie_derivative():
    t = Regular.from_exprs(["x*y", "sin(y)"], (0, 1), 2)
    S = sigma_embed(t, (0, 1), 2)
    X = VectorFieldExpr(["x^2", "x*y"])
    p = np.array([0.3, 0.9])
    got = lie_generalized(X, S, K2, 0.1, p)
    x, y = p
    w = np.array([x * y, np.sin(y)])
    dw = np.array([[y, x], [0.0, np.cos(y)]])          # dw[i, l] = d_l w_i
    J = np.array([[2 * x, 0.0], [y, x]])
    want = dw @ X.value(p[None])[0] + J.T @ w
    assert np.allclose(got, want, atol=1e-6)


def test_translation_field_commutes_on_flat_space():
    T = Regular.from_exprs(["x^2", "y"], (0, 1), 2)
    rep = commutator_residual(T, TransportOperator(FLAT), VectorFieldExpr(["1", "0.5"]), K0, P,
                              np.array([1.0, 0.0]), eps_grid(2.0 ** -2, 2.0 ** -4), manifold=FLAT)
    assert rep.verdict == "commutes"


def test_half_plane_isometry_homothety():
    D = DeltaAt([0.05, 0.95], TensorValue(0, 1, np.array([1.0, 2.0])))
    rep = homothety_commutation(DiffeoExpr.translation([0.4, 0.0]), D, TransportOperator(HALF), K2,
                                np.array([[0.0, 1.0]]), eps_grid(2.0 ** -3, 2.0 ** -4), tol=5e-6)
    assert rep.passed


def test_connection_mismatch_probes_against_flat():
    T = DeltaAt([0.05, 1.0], TensorValue(0, 1, np.array([1.0, 0.5])))
    probes = [(np.array([0.1, 1.2]), np.array([1.0, 0.0]), np.array([0.0, 1.0])),
              (np.array([-0.3, 0.7]), np.array([0.4, -1.0]), np.array([1.0, 1.0]))]
    rep = connection_mismatch_residual(T, TransportOperator(HALF), TransportOperator(FLAT), HALF, FLAT,
                                       K0, P, np.array([1.0, 0.0]), eps_grid(2.0 ** -3, 2.0 ** -4), probes)
    assert rep.info["probe_max"] < 2e-4
    assert rep.passed
