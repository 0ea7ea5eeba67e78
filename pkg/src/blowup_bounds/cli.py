"""Command-line surface: constants | bounds | trace | simulate | sweep | verify-identity.

Exit codes: 0 success, 2 usage/validation error, 1 computation failure.
All artifacts embed a run manifest (JSON) or carry a sidecar manifest
(CSV); rerunning with the same arguments and --timestamp reproduces
byte-identical output.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bounds import (
    BoundsInput,
    build_sequence,
    compute_report,
    delta1,
)
from .geometry import QuadratureSpec, boundary_point, full_boundary, gamma1_measure, parse_domain, parse_partition
from .kernel import KernelConstants, compute_constants, convex_identity_residual
from .reports import make_manifest, manifest_sidecar_path, render_csv, render_report
from .sweep import SWEEP_COLUMNS, SweepSpec, fit_slope, partition_by_regime, run_sweep

THREADS_ENV = "BLOWUP_BOUNDS_THREADS"


def _add_quadrature_args(p):
    p.add_argument("--boundary-nodes", type=int, default=1024)
    p.add_argument("--volume-nodes", type=int, default=16384)
    p.add_argument("--time-nodes", type=int, default=768)
    p.add_argument("--refine-limit", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-6)


def _add_common(p):
    p.add_argument("--output", help="destination path (default: standard output)")
    p.add_argument("--timestamp", help="manifest timestamp override (for reproducible reruns)")


def _spec_from(args) -> QuadratureSpec:
    return QuadratureSpec(
        boundary_nodes=args.boundary_nodes,
        volume_nodes=args.volume_nodes,
        time_nodes=args.time_nodes,
        refine_limit=args.refine_limit,
        tol=args.tol,
    )


def _manifest_args(args, exclude=("output", "trace_output", "plot", "timestamp", "func")):
    return {k: v for k, v in sorted(vars(args).items()) if k not in exclude and v is not None}


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(text: str, output: str | None, manifest):
    _emit(text, output)
    if output:
        with open(manifest_sidecar_path(output), "w") as fh:
            fh.write(render_report({}, manifest))


def _load_constants(args) -> KernelConstants:
    if getattr(args, "constants", None):
        import json

        with open(args.constants) as fh:
            return KernelConstants.from_dict(json.load(fh))
    domain = parse_domain(args.domain)
    return compute_constants(domain, _spec_from(args))


# -- subcommand handlers -----------------------------------------------------


def _cmd_constants(args) -> int:
    domain = parse_domain(args.domain)
    kc = compute_constants(domain, _spec_from(args))
    manifest = make_manifest("constants", _manifest_args(args), args.timestamp)
    _emit(render_report(kc.to_dict(), manifest), args.output)
    return 0


def _bounds_input(args, constants) -> BoundsInput:
    return BoundsInput(
        q=args.q,
        m0=args.m0,
        gamma1_area=args.gamma1_area,
        alpha=args.alpha,
        constants=constants,
    )


def _resolve_gamma1(args):
    domain = parse_domain(args.domain)
    part = parse_partition(args.gamma1, domain)
    args.gamma1_area = gamma1_measure(domain, part)
    return domain, part


def _cmd_bounds(args) -> int:
    domain, _ = _resolve_gamma1(args)
    constants = _load_constants(args)
    u0_integral = args.u0_integral
    if args.u0_const and u0_integral is None:
        u0_integral = domain.volume * args.m0 ** (1.0 - args.q)
    report = compute_report(
        _bounds_input(args, constants), u0_integral=u0_integral, c_free=args.c_free
    )
    manifest = make_manifest("bounds", _manifest_args(args), args.timestamp)
    _emit(render_report(report.to_dict(), manifest), args.output)
    return 0


def _cmd_trace(args) -> int:
    _resolve_gamma1(args)
    constants = _load_constants(args)
    d1 = delta1(args.t_star, args.gamma1_area, args.alpha, constants)
    trace = build_sequence(args.q, args.m0, d1, cap=args.cap)
    rows = zip(trace.ks, trace.m_values, trace.lambdas, trace.x_values)
    manifest = make_manifest("trace", _manifest_args(args), args.timestamp)
    _emit_csv(render_csv(["k", "M_k", "lambda_k", "x_k"], rows), args.output, manifest)
    return 0


def _parse_initial(text: str):
    kind, _, rest = text.partition(":")
    if kind == "const":
        return float(rest)
    if kind == "radial":
        coeffs = [float(c) for c in rest.split(",")]

        def profile(x, y):
            r2 = x * x + y * y
            return sum(c * r2 ** (k / 2.0) for k, c in enumerate(coeffs))

        return profile
    raise ValueError(f"bad initial spec {text!r}: expected const:VALUE or radial:c0,c1,...")


def _cmd_simulate(args) -> int:
    from .simulate import SimConfig, run_to_blowup

    domain = parse_domain(args.domain)
    part = parse_partition(args.gamma1, domain)
    nr, _, nth = args.resolution.partition("x")
    cfg = SimConfig(
        domain=domain,
        partition=part,
        q=args.q,
        initial=_parse_initial(args.init),
        resolution=(int(nr), int(nth)),
        stepper=args.stepper,
        safety=args.safety,
        thresholds=tuple(float(v) for v in args.thresholds.split(",")) if args.thresholds else None,
        horizon=args.horizon,
    )
    est = run_to_blowup(cfg, compute_error_estimate=not args.no_error_estimate)
    manifest = make_manifest("simulate", _manifest_args(args), args.timestamp)
    _emit(render_report(est.to_dict(), manifest), args.output)
    if args.trace_output:
        _emit_csv(render_csv(["time", "maxval"], est.m_history), args.trace_output, manifest)
    if args.plot:
        if not args.output:
            raise ValueError("--plot needs --output to place the figure next to")
        from .plots import plot_max_history

        plot_max_history(est.m_history, args.output + ".png")
    return 0


def _cmd_sweep(args) -> int:
    domain, _ = _resolve_gamma1(args)
    constants = _load_constants(args)
    fixed = {"q": args.q, "m0": args.m0, "gamma1_area": args.gamma1_area, "alpha": args.alpha}
    values = tuple(float(v) for v in args.values.split(","))

    sim_factory = None
    if args.simulate:
        from .simulate import SimConfig

        def sim_factory(value, params):
            arc = params["gamma1_area"]
            part = parse_partition(f"arcs:0-{arc:.17g}", domain)
            nr, _, nth = args.resolution.partition("x")
            return SimConfig(
                domain=domain,
                partition=part,
                q=params["q"],
                initial=params["m0"],
                resolution=(int(nr), int(nth)),
            )

    spec = SweepSpec(
        axis=args.axis,
        values=values,
        fixed=fixed,
        constants=constants,
        volume=domain.volume if args.u0_const else None,
        c_free=args.c_free,
        simulate_rows=args.simulate,
        sim_factory=sim_factory,
        sim_budget=args.sim_budget,
    )
    workers = int(os.environ.get(THREADS_ENV, "1"))
    rows = run_sweep(spec, max_workers=max(1, workers))
    manifest = make_manifest("sweep", _manifest_args(args), args.timestamp)
    _emit_csv(render_csv(SWEEP_COLUMNS, rows), args.output, manifest)

    fits = {}
    ok_rows = [r for r in rows if r["status"] == "ok"]
    for part_rows in partition_by_regime(ok_rows):
        if len(part_rows) >= 4:
            key = f"lower_new_closed[{part_rows[0]['regime']}]"
            try:
                fits[key] = fit_slope(part_rows, "value", "lower_new_closed").to_dict()
            except ValueError:
                pass
    sidecar = (args.output + ".slopes.json") if args.output else None
    _emit(render_report({"slope_fits": fits}, manifest), sidecar)
    if args.plot:
        if not args.output:
            raise ValueError("--plot needs --output to place the figure next to")
        from .plots import plot_sweep

        plot_sweep(rows, args.axis, args.output + ".png")
    return 0


def _cmd_verify_identity(args) -> int:
    domain = parse_domain(args.domain)
    spec = _spec_from(args)
    rng = np.random.default_rng(7)
    arcs = rng.uniform(0, domain.param_length, args.samples)
    times = np.exp(rng.uniform(np.log(args.t_min), np.log(args.t_max), args.samples))
    samples = []
    worst = 0.0
    for arc, t in zip(arcs, times):
        x, _ = boundary_point(domain, float(arc))
        residuals = []
        level_spec = spec
        for _ in range(args.levels):
            residuals.append(convex_identity_residual(x, float(t), domain, level_spec))
            level_spec = level_spec.refined()
        worst = max(worst, residuals[0])
        samples.append({"arc": float(arc), "t": float(t), "residuals": residuals})
    report = {"domain": args.domain, "max_residual_default": worst, "samples": samples}
    manifest = make_manifest("verify-identity", _manifest_args(args), args.timestamp)
    _emit(render_report(report, manifest), args.output)
    if args.plot:
        if not args.output:
            raise ValueError("--plot needs --output to place the figure next to")
        from .plots import plot_identity_residuals

        plot_identity_residuals(report, args.output + ".png")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blowup-bounds",
        description=(
            "Explicit bounds for the blow-up time of heat flow with the "
            "radiating boundary condition du/dn = u^q on part of a convex boundary. "
            "Domain grammar: disk:R | ellipse:a,b | rect:w,h | ball:R; "
            "boundary patch grammar: full | arcs:s0-s1[,s2-s3...] (arc length)."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="certified kernel constants b1 and B1 (JSON)")
    p.add_argument("--domain", required=True)
    _add_quadrature_args(p)
    _add_common(p)
    p.set_defaults(func=_cmd_constants)

    def bounds_common(p):
        p.add_argument("--domain", required=True)
        p.add_argument("--gamma1", required=True, help="full | arcs:s0-s1[,...]")
        p.add_argument("--q", type=float, required=True)
        p.add_argument("--m0", type=float, required=True)
        p.add_argument("--alpha", type=float, default=0.0)
        p.add_argument("--constants", help="JSON file from the constants subcommand")
        _add_quadrature_args(p)
        _add_common(p)

    p = sub.add_parser("bounds", help="all T* bounds for one instance (JSON report)")
    bounds_common(p)
    p.add_argument("--u0-integral", type=float, help="int_Omega u0^(1-q) dx for the upper bound")
    p.add_argument("--u0-const", action="store_true", help="treat u0 as the constant M0")
    p.add_argument("--c-free", type=float, default=1.0)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("trace", help="step-sequence trace at a given t* (CSV)")
    bounds_common(p)
    p.add_argument("--t-star", type=float, required=True)
    p.add_argument("--cap", type=int, default=10 ** 7)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("simulate", help="finite-difference blow-up run (JSON + optional CSV trace)")
    p.add_argument("--domain", required=True)
    p.add_argument("--gamma1", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--init", default="const:1.0", help="const:VALUE or radial:c0,c1,...")
    p.add_argument("--resolution", default="48x192")
    p.add_argument("--stepper", choices=["explicit", "semi-implicit"], default="semi-implicit")
    p.add_argument("--safety", type=float, default=0.5)
    p.add_argument("--thresholds", help="comma list of absolute blow-up thresholds")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--no-error-estimate", action="store_true")
    p.add_argument("--trace-output", help="CSV path for the time,maxval history")
    p.add_argument("--plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep (CSV + slope-fit JSON sidecar)")
    p.add_argument("--axis", choices=["gamma1", "q", "m0"], required=True)
    p.add_argument("--values", required=True, help="comma list of axis values")
    bounds_common(p)
    p.add_argument("--u0-const", action="store_true")
    p.add_argument("--c-free", type=float, default=1.0)
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--sim-budget", type=float, default=60.0)
    p.add_argument("--resolution", default="32x128")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify-identity", help="convex boundary-identity residual check (JSON)")
    p.add_argument("--domain", required=True)
    p.add_argument("--samples", type=int, default=6)
    p.add_argument("--t-min", type=float, default=0.05)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--plot", action="store_true")
    _add_quadrature_args(p)
    _add_common(p)
    p.set_defaults(func=_cmd_verify_identity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computation failure
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
