import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtf.distributions import DeltaAt, Regular, Sum, TestObject
from gtf.embedding import (embed, embedded_field, injectivity_probe, iota_vs_sigma, regularize,
                           regularized_pair, regularized_pair_direct, sigma_embed,
                           weak_convergence_test)
from gtf.fitting import eps_grid
from gtf.geometry import ChartManifold, parse_manifold
from gtf.mollifiers import SmoothingKernel, WindowDensity, build_radial_mollifier
from gtf.transport import TensorValue, TransportOperator

FLAT1 = TransportOperator(ChartManifold.flat(1, [-5], [5]))
FLAT2 = TransportOperator(ChartManifold.flat(2, [-5, -5], [5, 5]))
HALF = parse_manifold("dim 2\ndomain -5 5 0.05 10\nmetric [[1/y^2,0],[0,1/y^2]]")
K1 = SmoothingKernel(build_radial_mollifier(1, 1))
K2 = SmoothingKernel(build_radial_mollifier(2, 1))


def test_delta_embeds_to_scaled_kernel():
    d = DeltaAt([0.1], TensorValue(0, 0, np.array(2.0)))
    p = np.array([0.12])
    assert embed(d, FLAT1, K1, 2.0 ** -4, p) == pytest.approx(2 * K1.eval(2.0 ** -4, p, np.array([0.1])))


def test_constant_covector_is_reproduced_on_flat_space():
    T = Regular.from_exprs(["1.5", "-2"], (0, 1), 2)
    got = embed(T, FLAT2, K2, 0.1, np.array([0.3, 0.4]))
    assert np.allclose(got, [1.5, -2.0], atol=1e-13)


def test_half_plane_transport_enters_components():
    # dx has |dx|_g = y; transport to p rescales by the height ratio
    T = Regular.from_exprs(["1", "0"], (0, 1), 2)
    A = TransportOperator(HALF)
    got = embed(T, A, K2, 0.1, np.array([0.0, 1.0]))
    assert not np.allclose(got, [1.0, 0.0], atol=1e-6)
    assert np.allclose(got, [1.0, 0.0], atol=0.05)


def test_sigma_ignores_kernel():
    S = sigma_embed(Regular.from_exprs(["x", "y^2"], (0, 1), 2), (0, 1), 2)
    p = np.array([0.2, 0.5])
    assert np.allclose(S.at(K2, 0.1, p), [0.2, 0.25])
    assert np.allclose(S.at(K2, 0.01, p), [0.2, 0.25])


def test_generalized_field_arithmetic():
    T = Regular.from_exprs(["x", "1"], (0, 1), 2)
    R = embedded_field(T, FLAT2)
    p = np.array([0.1, 0.2])
    om = K2.density(0.1, p)
    assert np.allclose((R.scaled(3.0) - R)(om, p), 2 * R(om, p))
    assert R.contract(lambda q: np.array([1.0, 1.0]))(om, p) == pytest.approx(np.sum(R(om, p)))


def test_regularize_grid_shape():
    T = Regular.from_exprs(["x", "1"], (0, 1), 2)
    out = regularize(T, FLAT2, K2, 0.1, np.array([[0.0, 0.0], [0.1, 0.1], [0.2, 0.3]]))
    assert out.shape == (3, 2)


def test_smeared_pairing_matches_direct_quadrature():
    d = DeltaAt([0.1], TensorValue(0, 0, np.array(2.0)))
    xi = TestObject.scalar(WindowDensity([-1], [1], f=lambda q: np.cos(q[..., 0]), nodes=48, panels=32))
    assert regularized_pair(d, FLAT1, K1, 0.1, xi) == pytest.approx(
        regularized_pair_direct(d, FLAT1, K1, 0.1, xi), rel=1e-6)


def test_weak_convergence_of_delta():
    d = DeltaAt([0.1], TensorValue(0, 0, np.array(2.0)))
    xi = TestObject.scalar(WindowDensity([-1], [1], f=lambda q: np.cos(q[..., 0])))
    rep = weak_convergence_test(d, FLAT1, K1, xi, eps_grid(2.0 ** -3, 2.0 ** -8))
    assert rep.passed
    assert rep.fit.slope > 1.8


def test_iota_vs_sigma_flat_order():
    T = Regular.from_exprs(["sin(x)*y", "x^2 + y^3"], (0, 1), 2)
    rep = iota_vs_sigma(T, FLAT2, K2, np.array([[0.1, 0.2]]), eps_grid(2.0 ** -2, 2.0 ** -6))
    assert rep.passed and rep.fit.slope > 1.8


def test_injectivity_probe_sees_nonzero_limit():
    d = DeltaAt([0.1], TensorValue(0, 0, np.array(2.0)))
    xi = TestObject.scalar(WindowDensity([-1], [1], f=lambda q: np.cos(q[..., 0])))
    nonzero, limit, ref = injectivity_probe(d, FLAT1, K1, xi, eps_grid(2.0 ** -3, 2.0 ** -9), match_tol=1e-4)
    assert nonzero
    assert limit == pytest.approx(ref, abs=1e-4)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.02, 0.3))
def test_embedding_is_linear(a, b, eps):
    T = Regular.from_exprs(["x*y", "cos(x)"], (0, 1), 2)
    D = DeltaAt([0.05, 0.02], TensorValue(0, 1, np.array([1.0, -2.0])))
    p = np.array([0.0, 0.0])
    lhs = embed(Sum([(a, T), (b, D)]), FLAT2, K2, eps, p)
    rhs = a * embed(T, FLAT2, K2, eps, p) + b * embed(D, FLAT2, K2, eps, p)
    assert np.allclose(lhs, rhs, rtol=1e-11, atol=1e-9)
