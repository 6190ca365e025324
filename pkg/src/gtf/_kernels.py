"""Compiled RK4 kernels for geodesics and parallel transport.

Christoffel symbols of a DSL-defined manifold are compiled into a numba
``cfunc`` with signature ``(u, out) -> None`` filling ``out[k, i, j]``; the
integrators below take that function as a first-class argument, so they are
compiled once (and cached on disk) for every manifold.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import types
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

from . import expr as ex

OK, DOMAIN_EXIT, BLOW_UP = 0, 1, 2

if HAVE_NUMBA:
    GAMMA_SIG = types.void(types.float64[::1], types.float64[:, :, ::1])
    GAMMA_TYPE = types.FunctionType(GAMMA_SIG)
    _f8_2 = types.float64[:, ::1]
    _RESULT = types.Tuple((_f8_2, _f8_2, types.float64[:, :, ::1], types.int64[::1], types.float64[::1]))
    _INTEG_SIG = _RESULT(GAMMA_TYPE, _f8_2, _f8_2, types.float64[::1], types.int64,
                         types.float64[::1], types.float64[::1], types.boolean)

    @numba.njit(cache=True)
    def _levi_civita(g, dg, out):
        """``out[k,i,j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)`` by Gaussian elimination."""
        n = g.shape[0]
        lower = np.empty((n, n * n))
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    lower[l, i * n + j] = 0.5 * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
        a = g.copy()
        for c in range(n):
            piv = c
            for r in range(c + 1, n):
                if abs(a[r, c]) > abs(a[piv, c]):
                    piv = r
            if piv != c:
                for m in range(n):
                    a[c, m], a[piv, m] = a[piv, m], a[c, m]
                for m in range(n * n):
                    lower[c, m], lower[piv, m] = lower[piv, m], lower[c, m]
            for r in range(c + 1, n):
                f = a[r, c] / a[c, c]
                for m in range(c, n):
                    a[r, m] -= f * a[c, m]
                for m in range(n * n):
                    lower[r, m] -= f * lower[c, m]
        for c in range(n - 1, -1, -1):
            for m in range(n * n):
                acc = lower[c, m]
                for r in range(c + 1, n):
                    acc -= a[c, r] * lower[r, m]
                lower[c, m] = acc / a[c, c]
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    out[k, i, j] = lower[k, i * n + j]

    @numba.njit(_INTEG_SIG, cache=True)
    def integrate_batch(gam, X, W, T, N, lo, hi, want_p):
        """RK4 for ``u' = v, v' = -G(u)(v,v)`` and optionally ``P' = -G(u)(v,P)``.

        Trajectory ``b`` runs to time ``T[b]`` in ``N`` equal steps.
        """
        B, n = X.shape
        U = np.empty((B, n))
        V = np.empty((B, n))
        P_all = np.empty((B if want_p else 0, n, n))
        status = np.zeros(B, dtype=np.int64)
        texit = np.zeros(B)
        G = np.empty((n, n, n))
        u = np.empty(n)
        v = np.empty(n)
        ut = np.empty(n)
        vt = np.empty(n)
        ku = np.empty((4, n))
        kv = np.empty((4, n))
        P = np.empty((n, n))
        Pt = np.empty((n, n))
        kP = np.empty((4, n, n))
        coef = (0.0, 0.5, 0.5, 1.0)
        for b in range(B):
            h = T[b] / N
            for i in range(n):
                u[i] = X[b, i]
                v[i] = W[b, i]
                for j in range(n):
                    P[i, j] = 1.0 if i == j else 0.0
            for step in range(N):
                for stage in range(4):
                    c = coef[stage] * h
                    for i in range(n):
                        if stage == 0:
                            ut[i] = u[i]
                            vt[i] = v[i]
                        else:
                            ut[i] = u[i] + c * ku[stage - 1, i]
                            vt[i] = v[i] + c * kv[stage - 1, i]
                    if want_p:
                        for i in range(n):
                            for m in range(n):
                                Pt[i, m] = P[i, m] if stage == 0 else P[i, m] + c * kP[stage - 1, i, m]
                    gam(ut, G)
                    for k in range(n):
                        ku[stage, k] = vt[k]
                        acc = 0.0
                        for i in range(n):
                            gv = 0.0
                            for j in range(n):
                                gv += G[k, i, j] * vt[j]
                            acc += vt[i] * gv
                        kv[stage, k] = -acc
                    if want_p:
                        for k in range(n):
                            for m in range(n):
                                acc = 0.0
                                for i in range(n):
                                    for j in range(n):
                                        acc += G[k, i, j] * vt[i] * Pt[j, m]
                                kP[stage, k, m] = -acc
                bad = False
                for i in range(n):
                    u[i] += h / 6.0 * (ku[0, i] + 2.0 * ku[1, i] + 2.0 * ku[2, i] + ku[3, i])
                    v[i] += h / 6.0 * (kv[0, i] + 2.0 * kv[1, i] + 2.0 * kv[2, i] + kv[3, i])
                    if not (np.isfinite(u[i]) and np.isfinite(v[i])):
                        bad = True
                if want_p:
                    for i in range(n):
                        for m in range(n):
                            P[i, m] += h / 6.0 * (kP[0, i, m] + 2.0 * kP[1, i, m] + 2.0 * kP[2, i, m] + kP[3, i, m])
                if bad:
                    status[b] = BLOW_UP
                    texit[b] = (step + 1) * h
                    break
                out = False
                for i in range(n):
                    if not (u[i] > lo[i] and u[i] < hi[i]):
                        out = True
                if out:
                    status[b] = DOMAIN_EXIT
                    texit[b] = (step + 1) * h
                    break
            for i in range(n):
                U[b, i] = u[i]
                V[b, i] = v[i]
                if want_p:
                    for m in range(n):
                        P_all[b, i, m] = P[i, m]
        return U, V, P_all, status, texit


def gamma_kernel_from_christoffel(n, entries):
    """Compile ``christoffel k i j <expr>`` entries (0-based) into a cfunc, or ``None``."""
    if not HAVE_NUMBA:
        return None
    exprs = [e for *_, e in entries]
    lines, outs = ex.codegen(exprs, "u[{}]")
    body = ["def _gam(u, out):"] + lines
    body += [f"    out[{k}, {i}, {j}] = 0.0" for k in range(n) for i in range(n) for j in range(n)]
    body += [f"    out[{k}, {i}, {j}] = {code}" for (k, i, j, _), code in zip(entries, outs)]
    return _compile(body)


def _inverse_lines(n):
    """Scalar source for ``gi = g^-1`` by cofactors (n <= 3)."""
    g = [[f"g{i}{j}" for j in range(n)] for i in range(n)]
    if n == 1:
        return ["    gi00 = 1.0 / g00"]
    if n == 2:
        return ["    det = g00 * g11 - g01 * g10",
                "    gi00 = g11 / det", "    gi01 = -g01 / det",
                "    gi10 = -g10 / det", "    gi11 = g00 / det"]
    lines = []
    for i in range(3):
        for j in range(3):
            r = [a for a in range(3) if a != j]
            c = [b for b in range(3) if b != i]
            sign = "" if (i + j) % 2 == 0 else "-"
            lines.append(f"    c{i}{j} = {sign}({g[r[0]][c[0]]} * {g[r[1]][c[1]]} - {g[r[0]][c[1]]} * {g[r[1]][c[0]]})")
    lines.append("    det = g00 * c00 + g01 * c10 + g02 * c20")
    lines += [f"    gi{i}{j} = c{i}{j} / det" for i in range(3) for j in range(3)]
    return lines


def gamma_kernel_from_metric(n, flat_exprs):
    """Compile Levi-Civita symbols of metric expressions (row-major ``g_ij``)."""
    if not HAVE_NUMBA:
        return None
    derivs = [ex.differentiate(e, l) for l in range(n) for e in flat_exprs]
    lines, outs = ex.codegen(list(flat_exprs) + derivs, "u[{}]")
    body = ["def _gam(u, out):"] + lines
    if n > 3:
        body += [f"    g = np.empty(({n}, {n}))", f"    dg = np.empty(({n}, {n}, {n}))"]
        for idx in range(n * n):
            body.append(f"    g[{idx // n}, {idx % n}] = {outs[idx]}")
        for l in range(n):
            for idx in range(n * n):
                body.append(f"    dg[{l}, {idx // n}, {idx % n}] = {outs[n * n + l * n * n + idx]}")
        body.append("    _levi_civita(g, dg, out)")
        return _compile(body)
    for idx in range(n * n):
        body.append(f"    g{idx // n}{idx % n} = {outs[idx]}")
    for l in range(n):
        for idx in range(n * n):
            body.append(f"    d{l}{idx // n}{idx % n} = {outs[n * n + l * n * n + idx]}")
    body += _inverse_lines(n)
    for l in range(n):
        for i in range(n):
            for j in range(n):
                body.append(f"    L{l}{i}{j} = 0.5 * (d{i}{j}{l} + d{j}{i}{l} - d{l}{i}{j})")
    for k in range(n):
        for i in range(n):
            for j in range(n):
                terms = " + ".join(f"gi{k}{l} * L{l}{i}{j}" for l in range(n))
                body.append(f"    out[{k}, {i}, {j}] = {terms}")
    return _compile(body)


def _compile(body):
    ns = dict(ex.NAMESPACE)
    ns["np"] = np
    ns["_levi_civita"] = _levi_civita
    exec(compile("\n".join(body) + "\n", "<gtf-gamma>", "exec"), ns)  # noqa: S102 - generated from a parsed AST
    return numba.cfunc(GAMMA_SIG, error_model="numpy")(ns["_gam"])


def integrate(gam, x, w, t, nsteps, lo, hi, want_p):
    """Run :func:`integrate_batch` on arrays of shape ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    n = x.shape[-1]
    X = np.array(x.reshape(-1, n), order="C")
    W = np.array(np.broadcast_to(w, x.shape).reshape(-1, n), dtype=float, order="C")
    T = np.array(np.broadcast_to(np.asarray(t, dtype=float), shape).reshape(-1), order="C")
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    U, V, P, status, texit = integrate_batch(gam, X, W, T, int(nsteps), lo, hi, bool(want_p))
    P = P.reshape(shape + (n, n)) if want_p else None
    return U.reshape(shape + (n,)), V.reshape(shape + (n,)), P, status, texit
