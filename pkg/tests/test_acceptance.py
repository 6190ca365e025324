"""Acceptance suite: eleven property and rate criteria with tolerances and runtime limits.

Each test records one line in ``RESULTS``; ``conftest.py`` prints them at the
end of the pytest run. ``python tests/test_acceptance.py`` runs the suite
directly and prints the same lines.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from gtf.calculus import (commutator_residual, connection_mismatch_residual,
                          homothety_commutation, second_order_fd, second_order_formula)
from gtf.distributions import AxisPV, DeltaAt, Regular, TestObject
from gtf.embedding import iota_vs_sigma, weak_convergence_test
from gtf.fitting import eps_grid
from gtf.geodesics import jet_check_uv
from gtf.geometry import (ChartManifold, DiffeoExpr, VectorFieldExpr, parse_manifold,
                          random_polynomial_manifold)
from gtf.mollifiers import (SmoothingKernel, WindowDensity, build_radial_mollifier,
                            kernel_order_test, moment_residuals, sphere_area)
from gtf.transport import TensorValue, TransportOperator, holonomy_angle, jet_check_transport

RESULTS: dict[int, str] = {}

HALF_PLANE = "dim 2\ndomain -5 5 0.05 10\nmetric [[1/y^2,0],[0,1/y^2]]"
SPHERE = "dim 2\ndomain 0.05 3.0915926535897932 -7 13\nmetric [[1,0],[0,sin(x)^2]]"


def record(number, title, passed, detail, runtime, limit):
    ok = bool(passed) and runtime < limit
    RESULTS[number] = (f"criterion {number:2d} {title}: {'PASS' if ok else 'FAIL'} "
                       f"({detail}; {runtime:.2f} s of {limit:g} s)")
    return ok


@pytest.fixture(scope="module")
def half_plane():
    return parse_manifold(HALF_PLANE, "half-plane")


def test_c01_transport_jets(half_plane):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    flat = ChartManifold.flat(2, [-2, -2], [2, 2])
    cases = [("flat", flat, np.array([0.1, -0.2])), ("half-plane", half_plane, np.array([0.0, 1.0]))]
    for i in range(5):
        cases.append((f"poly{i}", random_polynomial_manifold(2, rng, scale=0.3), rng.uniform(-0.5, 0.5, 2)))
    worst = 0.0
    for _, M, x in cases:
        worst = max(worst, jet_check_transport(M, x, rng)["max"])
    dt = time.perf_counter() - t0
    assert record(1, "transport jets", worst < 1e-3, f"max residual {worst:.2e} < 1e-3", dt, 10)


def test_c02_geodesic_jets(half_plane):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    poly = random_polynomial_manifold(2, rng, scale=0.3)
    worst = 0.0
    for i in range(20):
        M, box = (half_plane, ([-1, 0.6], [1, 1.6])) if i % 2 == 0 else (poly, ([-0.5, -0.5], [0.5, 0.5]))
        x = rng.uniform(*box)
        worst = max(worst, jet_check_uv(M, x, rng.uniform(0.05, 0.5), rng)["max"])
    dt = time.perf_counter() - t0
    assert record(2, "geodesic jets", worst < 1e-4, f"max residual {worst:.2e} < 1e-4 over 20 samples", dt, 5)


def test_c03_mollifier_moments():
    t0 = time.perf_counter()
    worst, mass = 0.0, 0.0
    for n in (1, 2):
        for q in range(5):
            res = moment_residuals(build_radial_mollifier(n, q), oracle=True)
            worst = max(worst, float(np.max(np.abs(res))))
            mass = max(mass, abs(res[0]) / (n / sphere_area(n)))
    dt = time.perf_counter() - t0
    assert record(3, "mollifier moments", worst < 1e-10,
                  f"max residual {worst:.2e} < 1e-10, relative mass error {mass:.1e}", dt, 2)


def test_c04_kernel_order():
    t0 = time.perf_counter()
    grid = eps_grid(2.0 ** -3, 2.0 ** -9)
    x = np.array([0.3, -0.2])
    funcs = (lambda p: np.sin(p[..., 0]) * np.exp(2.0 * p[..., 1]),
             lambda p: 1.0 / (1.5 + p[..., 0] ** 2 + p[..., 0] * p[..., 1]))
    ok, slopes = True, []
    for k in range(4):
        K = SmoothingKernel(build_radial_mollifier(2, k))
        for f in funcs:
            fit, _ = kernel_order_test(K, f, x, grid)
            slopes.append(fit.slope)
            ok &= fit.passes(k + 0.8)
    dt = time.perf_counter() - t0
    shown = ", ".join(f"{s:.2f}" for s in slopes)
    assert record(4, "kernel order", ok, f"slopes [{shown}] vs k+0.8", dt, 30)


def test_c05_iota_vs_sigma(half_plane):
    t0 = time.perf_counter()
    A = TransportOperator(half_plane)
    T = Regular.from_exprs(["x*y + 1", "sin(x) / y"], (0, 1), 2)
    grid = np.array([[0.0, 1.0], [0.3, 0.8], [-0.2, 1.3]])
    ok, slopes = True, []
    for k in (1, 2):
        K = SmoothingKernel(build_radial_mollifier(2, k))
        rep = iota_vs_sigma(T, A, K, grid, eps_grid(2.0 ** -3, 2.0 ** -7))
        slopes.append(rep.fit.slope)
        ok &= rep.fit.passes(k + 0.8)
    dt = time.perf_counter() - t0
    assert record(5, "iota vs sigma", ok, f"slopes k=1: {slopes[0]:.2f}, k=2: {slopes[1]:.2f}", dt, 60)


def test_c06_weak_convergence(half_plane):
    t0 = time.perf_counter()
    flat1 = TransportOperator(ChartManifold.flat(1, [-5], [5]))
    flat2 = TransportOperator(ChartManifold.flat(2, [-5, -5], [5, 5]))
    curved = TransportOperator(half_plane)
    K1 = SmoothingKernel(build_radial_mollifier(1, 0))
    K2 = SmoothingKernel(build_radial_mollifier(2, 0))
    grid = eps_grid(2.0 ** -3, 2.0 ** -7)
    box = WindowDensity([-0.5, 0.5], [0.6, 1.5])
    xi_cov = TestObject(lambda q: np.stack([1 + q[..., 1] ** 2, q[..., 0]], -1), box, (0, 1))
    xi_1d = TestObject.scalar(WindowDensity([-1], [1], f=lambda q: np.cos(q[..., 0])))
    xi_pv = TestObject.scalar(WindowDensity([-0.5, 0.5], [0.6, 1.5], f=lambda q: np.exp(q[..., 0])))
    cases = [
        ("regular", Regular.from_exprs(["sin(x)*y", "x^2"], (0, 1), 2), flat2, K2, xi_cov),
        ("delta", DeltaAt([0.1], TensorValue(0, 0, np.array(2.0))), flat1, K1, xi_1d),
        ("delta/half-plane", DeltaAt([0.1, 1.0], TensorValue(0, 1, np.array([1.0, 0.5]))), curved, K2, xi_cov),
        ("axispv", AxisPV(0, [0.0, 1.0], 0.6), flat2, K2, xi_pv),
    ]
    ok, parts = True, []
    for name, T, A, K, xi in cases:
        rep = weak_convergence_test(T, A, K, xi, grid)
        parts.append(f"{name} {rep.fit.slope:.2f}")
        ok &= rep.passed
    dt = time.perf_counter() - t0
    assert record(6, "weak convergence", ok, "slopes " + ", ".join(parts), dt, 60)


def test_c07_killing_commutation(half_plane):
    t0 = time.perf_counter()
    A = TransportOperator(half_plane)
    K0 = SmoothingKernel(build_radial_mollifier(2, 0))
    p = np.array([0.0, 1.0])
    T = Regular.from_exprs(["1", "0"], (0, 1), 2)
    rep = commutator_residual(T, A, VectorFieldExpr(["1", "0"]), K0, p, np.array([1.0, 0.0]),
                              eps_grid(2.0 ** -3, 2.0 ** -7), manifold=half_plane)
    closed = float(np.max(np.abs(rep.closed)))
    ok = rep.verdict == "commutes" and closed < 1e-4
    flat = TransportOperator(ChartManifold.flat(2, [-5, -5], [5, 5]))
    K2 = SmoothingKernel(build_radial_mollifier(2, 2))
    pts = np.array([[0.0, 1.0], [0.2, 0.8]])
    S = Regular.from_exprs(["x*y", "sin(y)"], (0, 1), 2)
    D = DeltaAt([0.05, 0.95], TensorValue(0, 1, np.array([1.0, 2.0])))
    hom = []
    for mu, TT in ((DiffeoExpr.translation([0.3, -0.2]), S), (DiffeoExpr.scaling(2.0, 2), D)):
        h = homothety_commutation(mu, TT, flat, K2, pts, eps_grid(2.0 ** -3, 2.0 ** -6), tol=1e-8)
        hom.append(float(np.max(h.error)))
        ok &= h.passed
    dt = time.perf_counter() - t0
    assert record(7, "Killing commutation", ok,
                  f"verdict {rep.verdict}, closed form {closed:.1e}, homothety residuals "
                  f"{hom[0]:.1e} and {hom[1]:.1e}", dt, 60)


def test_c08_no_go_witness(half_plane):
    t0 = time.perf_counter()
    A = TransportOperator(half_plane)
    K0 = SmoothingKernel(build_radial_mollifier(2, 0))
    p = np.array([0.0, 1.0])
    W = AxisPV(0, p, 0.5, TensorValue(0, 1, np.array([0.0, 1.0])))
    rep = commutator_residual(W, A, VectorFieldExpr(["0", "1"]), K0, p, np.array([1.0, 0.0]),
                              eps_grid(2.0 ** -4, 2.0 ** -8), manifold=half_plane)
    d, c = float(rep.value[-1]), float(rep.closed[-1])
    rel = abs(d - c) / abs(c)
    dt = time.perf_counter() - t0
    assert record(8, "no-go witness", abs(d) > 1e-3 and rel < 5e-3,
                  f"D(2^-8) = {d:.5f}, closed form {c:.5f}, relative gap {rel:.1e}", dt, 60)


def test_c09_connection_mismatch(half_plane):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    other = random_polynomial_manifold(2, rng, half_width=3.0, scale=0.3)
    A, At = TransportOperator(half_plane), TransportOperator(other)
    probes = [(rng.uniform([-1, 0.6], [1, 1.6]), rng.normal(size=2), rng.normal(size=2)) for _ in range(20)]
    K = SmoothingKernel(build_radial_mollifier(2, 0))
    T = DeltaAt([0.05, 1.0], TensorValue(0, 1, np.array([1.0, 0.5])))
    rep = connection_mismatch_residual(T, A, At, half_plane, other, K, np.array([0.0, 1.0]),
                                       np.array([1.0, 0.0]), eps_grid(2.0 ** -3, 2.0 ** -4), probes)
    worst = rep.info["probe_max"]
    dt = time.perf_counter() - t0
    assert record(9, "connection mismatch", worst < 2e-4 and rep.info["probe_count"] == 20,
                  f"max probe residual {worst:.2e} < 2e-4 over 20 samples", dt, 10)


def test_c10_second_order_formula(half_plane):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    poly = random_polynomial_manifold(2, rng, scale=0.3)
    worst = 0.0
    for i in range(20):
        M, box = (half_plane, ([-0.5, 0.8], [0.5, 1.3])) if i % 2 == 0 else (poly, ([-0.5, -0.5], [0.5, 0.5]))
        c = rng.normal(scale=0.5, size=(2, 4))
        X = VectorFieldExpr([f"{c[k,0]:.6f} + {c[k,1]:.6f}*x + {c[k,2]:.6f}*y + {c[k,3]:.6f}*x*y"
                             for k in range(2)])
        Y, Z, x = rng.normal(size=2), rng.normal(size=2), rng.uniform(*box)
        want = second_order_formula(M, X, Y, Z, x)
        got = second_order_fd(TransportOperator(M), X, Y, Z, x, manifold=M)
        worst = max(worst, float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))))
    dt = time.perf_counter() - t0
    assert record(10, "second-order formula", worst < 2e-3,
                  f"max scaled residual {worst:.2e} < 2e-3 over 20 samples", dt, 30)


def test_c11_sphere_holonomy():
    t0 = time.perf_counter()
    S = parse_manifold(SPHERE, "sphere")
    th = np.arccos(1.0 / np.sqrt(3.0))
    verts = [[th, 0.0], [th, 2 * np.pi / 3], [th, 4 * np.pi / 3], [th, 2 * np.pi]]
    angle, _ = holonomy_angle(S, verts)
    err = abs(abs(angle) - np.pi / 2)
    dt = time.perf_counter() - t0
    assert record(11, "sphere holonomy", err < 1e-3, f"angle {angle:.12f}, |angle - pi/2| {err:.1e}", dt, 5)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
