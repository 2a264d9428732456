"""Command-line front end.

Every subcommand writes one JSON report (``--out`` or stdout) holding the
configuration echo, the package version, the result and a list of checks.
Exit status is 0 when every check passes, 2 when the input cannot be parsed
or validated, and 3 when a numerical check fails.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib import resources

import numpy as np

from . import __version__
from . import io as gio
from .errors import AssertionFailure, GrassotError, ParseError
from .grassmann import Scale, distance
from .linalg import trace_norm
from .spectral import phi, psi
from .state_cost import Budget, cost_p, state_geodesic, w_p
from .tensor import correlation, pure_cost, schmidt
from .transport import cost_matrix, dual_solve, is_cyclically_monotone

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ASSERTION = 3

COMMANDS = ("dist", "wp", "cost", "dual", "geodesic", "tensor-cost", "check")
SUITES = ("all", "geometry", "transport", "cost", "tensor")


class Report:
    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.result = {}
        self.checks = []

    def check(self, name, passed, value=None, tolerance=None):
        self.checks.append(
            {
                "name": name,
                "passed": bool(passed),
                "value": None if value is None else gio.encode_float(value),
                "tolerance": None if tolerance is None else gio.encode_float(tolerance),
            }
        )

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_json(self, status=None, error=None):
        out = {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "status": status or ("ok" if self.passed else "assertion_failed"),
            "result": self.result,
            "checks": self.checks,
        }
        if error is not None:
            out["error"] = error
        return out


def _tol(args, default):
    return default if args.tol is None else args.tol


def _budget(args):
    return Budget(restarts=args.restarts, grid=args.grid, seed=args.seed)


def _need(args, k):
    if len(args.inputs) != k:
        raise ParseError(f"{args.command} needs {k} input file(s), got {len(args.inputs)}", None, "inputs")
    return [(p, gio.load_json(p)) for p in args.inputs]


# ------------------------------------------------------------- subcommands


def cmd_dist(args, rep):
    (pa, a), (pb, b) = _need(args, 2)
    P, Q = gio.projection_from_json(a, pa), gio.projection_from_json(b, pb)
    d = distance(P, Q, args.scale)
    rep.result = {"distance": gio.encode_float(d), "rank": [P.rank, Q.rank]}
    d_rev = distance(Q, P, args.scale)
    if math.isfinite(d):
        rep.check("symmetry", abs(d - d_rev) <= _tol(args, 1e-12), abs(d - d_rev), _tol(args, 1e-12))
    rep.check("nonnegative", d >= 0, d, 0.0)


def cmd_wp(args, rep):
    (pa, a), (pb, b) = _need(args, 2)
    r0, r1 = gio.density_from_json(a, pa), gio.density_from_json(b, pb)
    res = w_p(r0, r1, args.p, args.scale)
    rep.result = {"value": gio.encode_float(res.cost), "plan": None if res.plan is None else gio.plan_to_json(res.plan)}
    if res.plan is not None:
        tol = _tol(args, 1e-9)
        rep.check("marginals", res.plan.marginal_error() <= tol, res.plan.marginal_error(), tol)
        rep.check("admissible", res.plan.is_admissible())


def cmd_cost(args, rep):
    (pa, a), (pb, b) = _need(args, 2)
    r0, r1 = gio.density_from_json(a, pa), gio.density_from_json(b, pb)
    res = cost_p(r0, r1, args.p, _budget(args), args.scale)
    rep.result = {
        "value": gio.encode_float(res.value),
        "certified": res.certified,
        "iterations": res.iterations,
        "restarts": res.restarts,
        "mu0": gio.measure_to_json(res.mu0),
        "mu1": gio.measure_to_json(res.mu1),
        "plan": gio.plan_to_json(res.plan),
    }
    bound = math.pi / 2 * float(args.scale)
    rep.check("bound_pi_over_2", res.value <= bound + 1e-9, res.value, bound)
    hist = res.history
    rep.check("monotone_history", all(b <= a + 1e-12 for a, b in zip(hist, hist[1:])))
    tol = _tol(args, 1e-8)
    e0 = trace_norm(psi(res.mu0).mat - r0.mat)
    e1 = trace_norm(psi(res.mu1).mat - r1.mat)
    rep.check("representation_source", e0 <= tol, e0, tol)
    rep.check("representation_target", e1 <= tol, e1, tol)


def cmd_dual(args, rep):
    (pa, a), (pb, b) = _need(args, 2)
    mu0 = gio.measure_or_state_from_json(a, pa)
    mu1 = gio.measure_or_state_from_json(b, pb)
    try:
        pot = dual_solve(mu0, mu1, args.p, args.scale)
    except GrassotError as exc:
        raise AssertionFailure(str(exc), None, "dual") from exc
    rep.result = {
        "potentials": gio.potentials_to_json(pot),
        "primal": gio.encode_float(pot.primal),
        "dual": gio.encode_float(pot.dual),
    }
    tol = _tol(args, 1e-8)
    rep.check("duality_gap", abs(pot.gap) <= tol, abs(pot.gap), tol)
    C = cost_matrix(mu0, mu1, args.p, args.scale)
    fin = np.isfinite(C)
    viol = float(np.max((pot.g[None, :] - pot.f[:, None] - C)[fin], initial=0.0))
    rep.check("feasibility", viol <= 1e-9, viol, 1e-9)


def cmd_geodesic(args, rep):
    (pa, a), (pb, b) = _need(args, 2)
    r0, r1 = gio.density_from_json(a, pa), gio.density_from_json(b, pb)
    res = w_p(r0, r1, args.p, args.scale)
    if not math.isfinite(res.cost):
        raise AssertionFailure("W_p is infinite; no geodesic", None, "inputs")
    path = state_geodesic(res, np.linspace(0.0, 1.0, args.times), args.p, args.scale)
    rep.result = {
        "value": gio.encode_float(res.cost),
        "times": [gio.encode_float(t) for t in path.times],
        "densities": [gio.matrix_to_json(d.mat) for d in path.densities],
        "orthogonal": [bool(f) for f in path.orthogonal_flags],
        "geodesic_error": None if path.geodesic_error is None else gio.encode_float(path.geodesic_error),
    }
    tol = _tol(args, 1e-8)
    e0 = trace_norm(path.densities[0].mat - r0.mat)
    e1 = trace_norm(path.densities[-1].mat - r1.mat)
    rep.check("endpoint_source", e0 <= tol, e0, tol)
    rep.check("endpoint_target", e1 <= tol, e1, tol)
    if path.geodesic_error is not None:
        rep.check("geodesic_identity", path.geodesic_error <= 1e-6, path.geodesic_error, 1e-6)


def cmd_tensor_cost(args, rep):
    ((pz, z),) = _need(args, 1)
    zeta = gio.tensor_from_json(z, pz)
    corr = correlation(zeta)
    res = pure_cost(zeta, args.p, _budget(args), args.scale, verify=True)
    sigma, separable = schmidt(zeta)
    rep.result = {
        "value": gio.encode_float(res.value),
        "marginal_cost": gio.encode_float(res.marginal_cost),
        "certified": res.certified,
        "schmidt": [gio.encode_float(s) for s in sigma],
        "separable": separable,
        "mu": gio.measure_to_json(res.mu),
        "rho1": gio.matrix_to_json(corr.rho1.mat),
        "rho2": gio.matrix_to_json(corr.rho2.mat),
    }
    tol = _tol(args, 1e-9)
    for name, err in sorted(corr.errors.items()):
        rep.check(f"identity_{name}", err <= tol, err, tol)
    rep.check("marginal_cost_le_pure", res.marginal_cost <= res.value + 1e-6, res.marginal_cost - res.value, 1e-6)


def _fixture(name):
    ref = resources.files("grassot").joinpath("fixtures", name)
    with resources.as_file(ref) as p:
        return gio.load_json(p)


def _suite(name):
    """``(check name, callable returning (value, target, tolerance))`` pairs."""
    fx = _fixture
    half = lambda: gio.density_from_json(fx("half_identity.json"))  # noqa: E731
    e1 = lambda: gio.density_from_json(fx("pure_e1.json"))  # noqa: E731
    d73 = lambda: gio.density_from_json(fx("diag_73.json"))  # noqa: E731
    d64 = lambda: gio.density_from_json(fx("diag_64.json"))  # noqa: E731
    geometry = [
        (
            "dist_lines_pi_over_4",
            lambda: (
                distance(gio.projection_from_json(fx("line_e1.json")), gio.projection_from_json(fx("line_diag.json"))),
                math.pi / 4,
                1e-12,
            ),
        ),
    ]
    transport = [
        ("wp_components_inf", lambda: (w_p(half(), e1(), 2).cost, math.inf, 0.0)),
        ("wp_diag", lambda: (w_p(d73(), d64(), 2).cost, math.sqrt(0.1) * math.pi / 2, 1e-12)),
        ("dual_gap_diag", lambda: (dual_solve(*_phis(d73(), d64()), 2).gap, 0.0, 1e-8)),
        (
            "monotone_diag",
            lambda: (float(is_cyclically_monotone(w_p(d73(), d64(), 2).plan, 2)), 1.0, 0.0),
        ),
    ]
    cost = [
        ("cost_half_vs_e1", lambda: (cost_p(half(), e1(), 2).value, math.pi / 4, 1e-4)),
        ("cost_self", lambda: (cost_p(d73(), d73(), 2).value, 0.0, 1e-12)),
    ]
    tensor = [
        ("pure_cost_bell", lambda: (pure_cost(gio.tensor_from_json(fx("bell.json"))).value, 0.0, 1e-6)),
        ("pure_cost_product", lambda: (pure_cost(gio.tensor_from_json(fx("product.json"))).value, math.pi / 2, 1e-9)),
    ]
    table = {"geometry": geometry, "transport": transport, "cost": cost, "tensor": tensor}
    if name == "all":
        return [c for k in ("geometry", "transport", "cost", "tensor") for c in table[k]]
    return table[name]


def _phis(r0, r1):
    return phi(r0), phi(r1)


def cmd_check(args, rep):
    if args.inputs:
        raise ParseError("check takes no input files", None, "inputs")
    rows = []
    for name, fn in _suite(args.suite):
        value, target, tol = fn()
        if math.isinf(target):
            ok = value == target
            dev = 0.0 if ok else math.inf
        else:
            dev = abs(value - target)
            ok = dev <= tol
        rep.check(name, ok, dev, tol)
        rows.append({"name": name, "value": gio.encode_float(value), "target": gio.encode_float(target)})
    rep.result = {"suite": args.suite, "cases": rows}


HANDLERS = {
    "dist": cmd_dist,
    "wp": cmd_wp,
    "cost": cmd_cost,
    "dual": cmd_dual,
    "geodesic": cmd_geodesic,
    "tensor-cost": cmd_tensor_cost,
    "check": cmd_check,
}


def _p(value):
    p = float(value)
    if not 1.0 <= p <= 16.0:
        raise argparse.ArgumentTypeError("p must lie in [1, 16]")
    return p


def _seed(value):
    s = int(value)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _scale(value):
    try:
        return Scale.parse(value)
    except (KeyError, ValueError) as exc:
        raise argparse.ArgumentTypeError("scale must be CANONICAL or EMBEDDED") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("inputs", nargs="*", help="input JSON files")
    common.add_argument("--p", type=_p, default=2.0, help="transport exponent (default 2)")
    common.add_argument("--scale", type=_scale, default=Scale.CANONICAL, help="CANONICAL or EMBEDDED")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--restarts", type=int, default=8)
    common.add_argument("--grid", type=int, default=64, help="grid resolution of the certificate oracle")
    common.add_argument("--tol", type=float, default=None, help="override the checked tolerance")
    common.add_argument("--out", default=None, help="report path (default stdout)")
    parser = argparse.ArgumentParser(prog="grassot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"grassot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dist", parents=[common], help="distance between two projections")
    sub.add_parser("wp", parents=[common], help="Wasserstein distance of two states")
    sub.add_parser("cost", parents=[common], help="transport cost of two states")
    sub.add_parser("dual", parents=[common], help="Kantorovich potentials")
    g = sub.add_parser("geodesic", parents=[common], help="displacement interpolation of two states")
    g.add_argument("--times", type=int, default=11, help="number of time points")
    sub.add_parser("tensor-cost", parents=[common], help="cost of a pure tensor state")
    c = sub.add_parser("check", parents=[common], help="run bundled fixture checks")
    c.add_argument("--suite", choices=SUITES, default="all")
    return parser


def _config(args):
    cfg = {
        "command": args.command,
        "inputs": list(args.inputs),
        "p": args.p,
        "scale": args.scale.name,
        "seed": args.seed,
        "restarts": args.restarts,
        "grid": args.grid,
        "tol": args.tol,
    }
    if args.command == "geodesic":
        cfg["times"] = args.times
    if args.command == "check":
        cfg["suite"] = args.suite
    return cfg


def _emit(args, obj):
    if args.out:
        gio.write_json_atomic(args.out, obj)
    else:
        sys.stdout.write(gio.dumps(obj))


def run(args):
    """Execute parsed arguments; returns the exit status."""
    rep = Report(args.command, _config(args))
    try:
        HANDLERS[args.command](args, rep)
    except AssertionFailure as exc:
        err = {"type": type(exc).__name__, "message": str(exc), "path": exc.path, "field": exc.field}
        _emit(args, rep.to_json("assertion_failed", err))
        print(f"grassot: assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except GrassotError as exc:
        err = {
            "type": type(exc).__name__,
            "message": str(exc),
            "path": getattr(exc, "path", None),
            "field": getattr(exc, "field", None),
        }
        _emit(args, rep.to_json("invalid", err))
        print(f"grassot: {err['type']}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(args, rep.to_json())
    return EXIT_OK if rep.passed else EXIT_ASSERTION


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.restarts < 1 or args.grid < 2:
        parser.error("restarts must be >= 1 and grid >= 2")
    if args.command == "geodesic" and args.times < 2:
        parser.error("times must be >= 2")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
