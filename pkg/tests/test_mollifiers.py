import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtf.errors import IllConditionedError, ParseError
from gtf.geometry import DiffeoExpr
from gtf.mollifiers import (SmoothingKernel, WindowDensity, build_radial_mollifier, export_mollifier,
                            import_mollifier, kernel_growth_probe, moment_residuals, pullback_kernel,
                            sphere_area)


def test_sphere_area_values():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("q", [0, 2, 5])
def test_moments_match_targets(n, q):
    res = moment_residuals(build_radial_mollifier(n, q), oracle=True)
    assert res.shape == (q + 1,)
    assert np.max(np.abs(res)) < 1e-10


def test_high_order_builds():
    # coefficients grow to about 1e9 at q = 12, so the guarantee is relative
    moll = build_radial_mollifier(2, 12)
    scale = max(1.0, float(np.max(np.abs(moll.coefficients))))
    assert np.max(np.abs(moment_residuals(moll, oracle=False))) / scale < 1e-12


def test_order_out_of_range():
    with pytest.raises(IllConditionedError):
        build_radial_mollifier(2, 40)


def test_profile_support_and_plateau():
    moll = build_radial_mollifier(2, 2)
    assert moll.profile(np.array([1.0, 1.5]))[0] == pytest.approx(0.0, abs=1e-14)
    assert moll.profile(np.array([1.5]))[0] == 0.0
    flat = moll.profile(np.array([0.0, 0.05, 0.09]))
    assert np.allclose(flat, flat[0])


def test_kernel_mass_and_symmetry():
    K = SmoothingKernel(build_radial_mollifier(2, 1))
    p = np.array([0.2, -0.1])
    pts, w = K.nodes(0.1, p)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(w @ (pts - p), 0.0, atol=1e-14)
    assert np.max(np.linalg.norm(pts - p, axis=1)) <= K.support_radius(0.1) + 1e-15
    y = np.array([0.23, -0.08])
    assert K.eval(0.1, p, y) == pytest.approx(K.eval(0.1, y, p))


def test_export_import_roundtrip():
    moll = build_radial_mollifier(2, 3)
    again = import_mollifier(export_mollifier(moll))
    s = np.linspace(0, 1, 17)
    assert np.array_equal(again.profile(s), moll.profile(s))


def test_import_rejects_garbage():
    text = export_mollifier(build_radial_mollifier(1, 1))
    with pytest.raises(ParseError):
        import_mollifier(text.replace("order 1", "order 3"))


def test_pullback_kernel_under_translation_is_shift():
    K = SmoothingKernel(build_radial_mollifier(2, 1))
    mu = DiffeoExpr.translation([0.3, -0.2])
    p = np.array([0.1, 0.1])
    omega = pullback_kernel(mu, K, 0.1, p)
    y = np.array([0.12, 0.08])
    assert omega(y[None])[0] == pytest.approx(K.eval(0.1, p + [0.3, -0.2], y + [0.3, -0.2]))


def test_growth_exponent_is_dimension_plus_derivatives():
    K = SmoothingKernel(build_radial_mollifier(1, 0))
    e, sups = kernel_growth_probe(K, 1, 0, np.array([[0.0]]), [2.0 ** -3, 2.0 ** -5],
                                  rng=np.random.default_rng(0), samples=200)
    assert abs(e - 2.0) < 0.2
    assert sups[1] > sups[0]


def test_growth_of_combined_derivative_stays_at_dimension():
    # the combined slot derivative costs no extra power of eps at a generic point
    K = SmoothingKernel(build_radial_mollifier(2, 0))
    e, _ = kernel_growth_probe(K, 0, 1, np.array([[0.5, 0.5]]), [2.0 ** -3, 2.0 ** -5],
                               rng=np.random.default_rng(0), samples=200)
    assert abs(e - 2.0) < 0.2


def test_window_density_integrates_polynomials():
    W = WindowDensity([0, 0], [1, 2], f=lambda q: q[..., 0] * q[..., 1], power=0)
    pts, w = W.nodes()
    assert np.sum(w) == pytest.approx(0.5 * 2.0, rel=1e-12)   # int x dx * int y dy


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(-1, 1), st.floats(-1, 1))
def test_kernel_reproduces_linear_functions(eps, a, b):
    K = SmoothingKernel(build_radial_mollifier(2, 0))
    p = np.array([a, b])
    pts, w = K.nodes(eps, p)
    f = 3.0 + 2.0 * pts[:, 0] - pts[:, 1]
    assert w @ f == pytest.approx(3.0 + 2.0 * a - b, abs=1e-12)
