"""Command line driver: ``gtf geodesic|transport|kernel|embed|commute``.

Every subcommand writes CSV tables and a JSON summary to ``--out`` and
exits with 0 when all verdicts pass, 1 when a threshold fails (the failing
criterion is named on stderr) and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import time

import numpy as np

from . import expr as ex
from .calculus import (commutator_residual, connection_mismatch_residual, homothety_commutation,
                       second_order_fd, second_order_formula)
from .distributions import Regular, load_distribution
from .embedding import injectivity_probe, iota_vs_sigma, weak_convergence_test
from .errors import ConfigError, GTFError
from .fitting import eps_grid
from .geodesics import jet_check_uv
from .geometry import ChartManifold, DiffeoExpr, VectorFieldExpr, parse_manifold
from .mollifiers import SmoothingKernel, WindowDensity, build_radial_mollifier, kernel_order_test, moment_residuals
from .reports import csv_text, make_report, write_json
from .transport import TransportOperator, holonomy_angle, jet_check_transport

SUBCOMMANDS = ("geodesic", "transport", "kernel", "embed", "commute")

DEFAULTS = {
    "manifold": None, "dist": None, "dim": None, "order": None, "smax": 1.0,
    "eps_start": 2.0 ** -3, "eps_stop": None, "eps_factor": 2.0, "grid": None,
    "seed": 0, "out": "gtf-out", "format": "both", "point": None,
    "field": None, "vector": "X=d/dx", "triangle": None, "expect_angle": None,
    "diffeo": None,
}


# ---------------------------------------------------------------------------
# argument handling

def build_parser():
    ap = argparse.ArgumentParser(prog="gtf", description="Generalized tensor field experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--manifold", help="manifold-definition file")
        p.add_argument("--dist", help="distribution-definition file")
        p.add_argument("--dim", type=int, help="dimension when no manifold is given")
        p.add_argument("--order", type=int, help="mollifier order q")
        p.add_argument("--smax", type=float, help="mollifier support s_max")
        p.add_argument("--eps-start", type=float)
        p.add_argument("--eps-stop", type=float)
        p.add_argument("--eps-factor", type=float)
        p.add_argument("--grid", type=int, help="number of sample points")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json", "both"))
        p.add_argument("--point", help="base point, comma separated")
        if name in ("commute", "embed"):
            p.add_argument("--field", help="smooth field: dx, dy, dx2 or [c1, c2, ...] covector components")
        if name == "commute":
            p.add_argument("--vector", help='vector field, e.g. "X=d/dx" or "X=[x*y, 1]"')
            p.add_argument("--diffeo", help='homothety check: "f1, f2; g1, g2" (map; inverse)')
        if name == "transport":
            p.add_argument("--triangle", help='holonomy polygon "x1,y1; x2,y2; ..." (closed)')
            p.add_argument("--expect-angle", help="expected holonomy angle (expression)")
    return ap


def read_config(path):
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        cfg[key] = val
    return cfg


_TYPES = {"dim": int, "order": int, "grid": int, "seed": int, "smax": float,
          "eps_start": float, "eps_stop": float, "eps_factor": float}


def merge_options(args):
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    for key, typ in _TYPES.items():
        if opts[key] is not None:
            try:
                opts[key] = typ(opts[key])
            except ValueError as err:
                raise ConfigError(f"{key}: {err}") from err
    if opts["format"] not in ("csv", "json", "both"):
        raise ConfigError("format must be csv, json or both")
    return opts


def _eps(opts, stop_default):
    stop = opts["eps_stop"] if opts["eps_stop"] is not None else stop_default
    try:
        return eps_grid(opts["eps_start"], stop, opts["eps_factor"])
    except ValueError as err:
        raise ConfigError(f"eps grid: {err}") from err


def load_manifold(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read manifold file: {err}") from err
    return parse_manifold(text, name=os.path.basename(path))


def _manifold(opts, default_dim=2):
    if opts["manifold"]:
        return load_manifold(opts["manifold"])
    n = opts["dim"] or default_dim
    return ChartManifold.flat(n, [-2.0] * n, [2.0] * n, name=f"flat{n}d")


def _point(opts, manifold):
    if opts["point"] is None:
        return 0.5 * (manifold.lo + manifold.hi)
    try:
        p = np.array([float(v) for v in str(opts["point"]).split(",")])
    except ValueError as err:
        raise ConfigError(f"point: {err}") from err
    if p.size != manifold.dim or not manifold.contains(p):
        raise ConfigError("point must have dim coordinates and lie inside the chart domain")
    return p


def parse_vector_field(text, dim):
    """``X=d/dx``, ``d/dx2`` or ``[e1, e2, ...]`` (the ``X=`` prefix is optional)."""
    body = re.sub(r"^\s*[A-Za-z_]\w*\s*=", "", text).strip()
    m = re.fullmatch(r"d/d(\w+)", body)
    if m:
        k = ex.variable_index(m.group(1))
        if k is None or k >= dim:
            raise ConfigError(f"unknown coordinate {m.group(1)!r}")
        return VectorFieldExpr(["1" if i == k else "0" for i in range(dim)])
    if body.startswith("[") and body.endswith("]"):
        return VectorFieldExpr([c.strip() for c in body[1:-1].split(",")], dim)
    raise ConfigError(f"cannot parse vector field {text!r}")


def parse_field(text, dim):
    """Covector field ``dx``/``dy``/``dx2`` or ``[c1, ...]`` as a :class:`Regular` distribution."""
    body = text.strip()
    m = re.fullmatch(r"d(\w+)", body)
    if m and ex.variable_index(m.group(1)) is not None:
        k = ex.variable_index(m.group(1))
        if k >= dim:
            raise ConfigError(f"unknown coordinate {m.group(1)!r}")
        return Regular.from_exprs(["1" if i == k else "0" for i in range(dim)], (0, 1), dim)
    if body.startswith("[") and body.endswith("]"):
        return Regular.from_exprs([c.strip() for c in body[1:-1].split(",")], (0, 1), dim)
    raise ConfigError(f"cannot parse field {text!r}")


def _kernel(opts, dim, default_order):
    q = opts["order"] if opts["order"] is not None else default_order
    return SmoothingKernel(build_radial_mollifier(dim, q, opts["smax"]))


# ---------------------------------------------------------------------------
# outputs

class Output:
    def __init__(self, opts, command):
        self.dir = opts["out"]
        self.fmt = opts["format"]
        self.summary = {"command": command, "seed": opts["seed"], "experiments": {}}
        self.failures = []
        os.makedirs(self.dir, exist_ok=True)

    def table(self, name, rows, columns=None):
        if self.fmt in ("csv", "both"):
            path = os.path.join(self.dir, f"{name}.csv")
            text = csv_text(rows) if columns is None else csv_text(rows, columns)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)

    def record(self, name, data, passed):
        data = dict(data)
        data["passed"] = bool(passed)
        self.summary["experiments"][name] = data
        if not passed:
            self.failures.append(name)

    def finish(self):
        self.summary["passed"] = not self.failures
        if self.fmt in ("json", "both"):
            write_json(os.path.join(self.dir, "summary.json"), self.summary)
        for name in self.failures:
            print(f"FAIL: {name}", file=sys.stderr)
        return 0 if not self.failures else 1


# ---------------------------------------------------------------------------
# subcommands

def run_geodesic(opts, out):
    M = _manifold(opts)
    rng = np.random.default_rng(opts["seed"])
    count = opts["grid"] or 20
    margin = 0.1 * float(np.min(M.hi - M.lo))
    x = M.sample(rng, count, margin=margin)
    t = rng.uniform(0.5, 1.0, count)
    res = jet_check_uv(M, x, t, rng)
    rows = [(k, v) for k, v in res.items()]
    out.table("geodesic_jets", rows, ("quantity", "residual"))
    out.record("geodesic_jets", {"residuals": res, "threshold": 1e-4, "samples": count}, res["max"] < 1e-4)


def run_transport(opts, out):
    M = _manifold(opts)
    rng = np.random.default_rng(opts["seed"])
    count = opts["grid"] or 5
    margin = 0.1 * float(np.min(M.hi - M.lo))
    rows = []
    worst = 0.0
    for i, x in enumerate(M.sample(rng, count, margin=margin)):
        res = jet_check_transport(M, x, rng)
        rows.append((i, *(res[k] for k in ("i", "ii", "iii", "max"))))
        worst = max(worst, res["max"])
    out.table("transport_jets", rows, ("sample", "i", "ii", "iii", "max"))
    out.record("transport_jets", {"max_residual": worst, "threshold": 1e-3}, worst < 1e-3)
    if opts["triangle"]:
        try:
            verts = np.array([[float(ex.compile_expr(ex.parse_expr(c))(np.zeros(1))) for c in v.split(",")]
                              for v in opts["triangle"].split(";")])
        except (ValueError, GTFError) as err:
            raise ConfigError(f"triangle: {err}") from err
        angle, _ = holonomy_angle(M, verts)
        data = {"angle": angle}
        ok = True
        if opts["expect_angle"] is not None:
            want = float(ex.compile_expr(ex.parse_expr(str(opts["expect_angle"])))(np.zeros(1)))
            data.update(expected=want, error=abs(angle - want))
            ok = abs(angle - want) < 1e-3
        out.table("holonomy", [(angle, data.get("expected", float("nan")))], ("angle", "expected"))
        out.record("holonomy", data, ok)


def _test_functions(n):
    def f1(p):
        return np.prod(np.sin(p + 0.3 + 0.2 * np.arange(n)), axis=-1)

    def f2(p):
        return np.exp(0.5 * np.sum(p, axis=-1)) / (1.0 + 0.25 * p[..., 0] ** 2)
    return {"f1": f1, "f2": f2}


def run_kernel(opts, out):
    n = opts["dim"] or (load_manifold(opts["manifold"]).dim if opts["manifold"] else 2)
    q = opts["order"] if opts["order"] is not None else 3
    moll = build_radial_mollifier(n, q, opts["smax"])
    res = moment_residuals(moll)
    out.record("moments", {"dim": n, "order": q, "residuals": res.tolist(), "threshold": 1e-10},
               bool(np.max(np.abs(res)) < 1e-10))
    out.table("moments", [(j, r) for j, r in enumerate(res)], ("j", "residual"))
    K = SmoothingKernel(moll)
    eps = _eps(opts, 2.0 ** -9)
    x = np.full(n, 0.2)
    for name, f in _test_functions(n).items():
        fit, errs = kernel_order_test(K, f, x, eps)
        rep = make_report(f"kernel_order_{name}", eps, errs, errs, q + 0.8)
        out.table(rep.name, rep.rows())
        out.record(rep.name, rep.summary(), rep.passed)


def _default_test_object(M, rank, center):
    from .distributions import TestObject
    n = M.dim
    half = 0.25 * float(np.min(M.hi - M.lo))
    half = min(half, 0.5 * float(M.distance_to_boundary(center)))
    omega = WindowDensity(center - half, center + half, f=lambda q: 1.0 + 0.25 * q[..., 0])
    r, s = rank
    comps = np.ones((n,) * (r + s))
    return TestObject.constant(comps, omega, rank) if r + s else TestObject.scalar(omega)


def run_embed(opts, out):
    M = _manifold(opts, default_dim=opts["dim"] or 1)
    A = TransportOperator(M)
    if not opts["dist"] and not opts["field"]:
        raise ConfigError("embed needs --dist or --field")
    T = load_distribution(opts["dist"], M.dim) if opts["dist"] else parse_field(opts["field"], M.dim)
    K = _kernel(opts, M.dim, 1)
    eps = _eps(opts, 2.0 ** -7)
    p = _point(opts, M)
    if opts["dist"]:
        xi = _default_test_object(M, T.rank, p)
        rep = weak_convergence_test(T, A, K, xi, eps)
        out.table("weak_convergence", rep.rows())
        out.record("weak_convergence", rep.summary(), rep.passed)
        scale = max(1.0, abs(rep.reference))
        nonzero, limit, ref = injectivity_probe(T, A, K, xi, eps, match_tol=1e-2 * scale,
                                                values=rep.value)
        out.record("injectivity", {"nonzero_limit": nonzero, "limit": limit, "reference": ref},
                   nonzero or abs(ref) < 1e-12)
    # A smooth field is checked pointwise against sigma; uniform convergence
    # implies the weak limit, and the smeared pairing would need one transport
    # per (outer node, kernel node) pair.
    smooth = parse_field(opts["field"], M.dim) if opts["field"] else (T if isinstance(T, Regular) else None)
    if smooth is not None:
        rep = iota_vs_sigma(smooth, A, K, p[None], eps)
        out.table("iota_vs_sigma", rep.rows())
        out.record("iota_vs_sigma", rep.summary(), rep.passed)


def run_commute(opts, out):
    M = _manifold(opts)
    A = TransportOperator(M)
    n = M.dim
    if opts["dist"]:
        T = load_distribution(opts["dist"], n)
    else:
        T = parse_field(opts["field"] or "dx", n)
    X = parse_vector_field(opts["vector"], n)
    K = _kernel(opts, n, 0)
    eps = _eps(opts, 2.0 ** -7)
    p = _point(opts, M)
    r, s = T.rank
    v = np.zeros((n,) * (r + s))
    v[(0,) * (r + s)] = 1.0
    rep = commutator_residual(T, A, X, K, p, v, eps, manifold=M)
    rows = [(e, d, abs(d), c) for e, d, c in zip(rep.eps, rep.value, rep.closed)]
    out.table("commutator", rows, ("epsilon", "value", "error", "closed_form"))
    out.record("commutator", rep.summary(), rep.verdict in ("commutes", "fails-with-formula-match"))
    # connection mismatch against the flat connection on the same chart
    rng = np.random.default_rng(opts["seed"])
    F = ChartManifold.flat(n, M.lo, M.hi)
    rad = 0.1 * float(np.min(M.hi - M.lo))
    probes = [(p + rad * rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)) for _ in range(20)]
    cm = connection_mismatch_residual(T, A, TransportOperator(F), M, F, K, p, v, eps[:2], probes)
    out.record("connection_mismatch", cm.summary(), cm.passed)
    # second-order formula against double finite differences
    worst = 0.0
    for _ in range(5):
        x = p + rad * rng.uniform(-1, 1, n)
        Y, Z = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        worst = max(worst, float(np.max(np.abs(second_order_fd(A, X, Y, Z, x, manifold=M)
                                                 - second_order_formula(M, X, Y, Z, x)))))
    out.record("second_order_formula", {"max_residual": worst, "threshold": 2e-3}, worst < 2e-3)
    if opts["diffeo"]:
        try:
            fwd, inv = (part.split(",") for part in opts["diffeo"].split(";"))
            mu = DiffeoExpr([c.strip() for c in fwd], [c.strip() for c in inv])
        except (ValueError, GTFError) as err:
            raise ConfigError(f"diffeo: {err}") from err
        hom = homothety_commutation(mu, T, A, K, p[None], eps[:3], tol=5e-6)
        out.table("homothety", hom.rows())
        out.record("homothety", hom.summary(), hom.passed)


RUNNERS = {"geodesic": run_geodesic, "transport": run_transport, "kernel": run_kernel,
           "embed": run_embed, "commute": run_commute}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        opts = merge_options(args)
        out = Output(opts, args.command)
        start = time.perf_counter()
        RUNNERS[args.command](opts, out)
        out.summary["runtime_s"] = round(time.perf_counter() - start, 3)
    except (ConfigError, GTFError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    code = out.finish()
    print(f"{args.command}: {'pass' if code == 0 else 'fail'} ({out.dir})")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
