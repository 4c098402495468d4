"""Command-line front end.

Exit codes: 0 success/pass, 1 check failed, 2 invalid input (nothing
written), 3 simulation diverged (trace and verdict still written),
4 critical-gain bracket error.
"""
import argparse
import sys

import numpy as np

from . import analysis as an
from .constants import TOL
from .errors import BracketError, L1EquivError
from .scenario import load_scenario
from .simulator import IntegratorConfig, atomic_write_text, run_closed_loop, write_trace_csv

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_DIVERGED, EXIT_BRACKET = 0, 1, 2, 3, 4


def _kv(pairs) -> str:
    out = []
    for key, value in pairs:
        if isinstance(value, float):
            value = format(value, ".17g")
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"


def _grid(text: str):
    try:
        a, b, steps = text.split(":")
        steps = int(steps)
        if steps < 1:
            raise ValueError
        return list(np.linspace(float(a), float(b), steps))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:steps, got {text!r}") from None


def cmd_simulate(args):
    sc = load_scenario(args.config)
    run = run_closed_loop(args.arch, sc.plant, sc.ref, sc.l1, sc.init, sc.integrator, args.estimator)
    write_trace_csv(run.trace, args.out)
    verdict = _kv(
        [
            ("arch", args.arch),
            ("verdict", run.verdict.value),
            ("diverged_at", float(run.diverged_at) if run.diverged_at is not None else "none"),
            ("samples", len(run.trace)),
        ]
    )
    atomic_write_text(args.out + ".verdict", verdict)
    sys.stdout.write(verdict)
    return EXIT_OK if run.completed else EXIT_DIVERGED


def cmd_equiv(args):
    sc = load_scenario(args.config)
    variants = ["true", "frozen", "scripted"] if args.estimator == "all" else [args.estimator]
    text, ok = [], True
    for est in variants:
        rep = an.equivalence_check(sc.plant, sc.ref, sc.l1, sc.init, sc.integrator, est, tol=args.tol)
        ok &= rep.passed
        text.append(f"[{est}]\n" + an.report_text(rep))
    text.append(f"[summary]\npassed = {ok}\n")
    out = "\n".join(text)
    atomic_write_text(args.out, out)
    sys.stdout.write(out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_charpoly(args):
    sc = load_scenario(args.config)
    k = sc.l1.k if args.k is None else args.k
    theta = sc.plant.a - sc.ref.a_m
    lhs, rhs = an.charpoly_a0(sc.plant, sc.ref, theta, k)
    err = an.polynomial_agreement(lhs, rhs)
    match = err <= args.rtol
    verdict = an.routh_hurwitz(rhs)
    out = _kv(
        [
            ("k", float(k)),
            ("lhs", " ".join(format(c, ".17g") for c in lhs.coeffs)),
            ("rhs", " ".join(format(c, ".17g") for c in rhs.coeffs)),
            ("max_relative_discrepancy", err),
            ("match", match),
            ("stability", verdict.tag.value),
        ]
    )
    atomic_write_text(args.out, out)
    sys.stdout.write(out)
    return EXIT_OK if match else EXIT_FAIL


def cmd_kc(args):
    sc = load_scenario(args.config)
    try:
        kc = an.critical_gain(sc.plant, sc.ref, args.k_lo, args.k_hi, args.tol)
    except BracketError as exc:
        out = _kv([("status", "bracket-error"), ("message", str(exc))])
        atomic_write_text(args.out, out)
        sys.stderr.write(str(exc) + "\n")
        return EXIT_BRACKET
    out = _kv([("status", "ok"), ("k_c", kc), ("tol", args.tol), ("k_lo", args.k_lo), ("k_hi", args.k_hi)])
    atomic_write_text(args.out, out)
    sys.stdout.write(out)
    return EXIT_OK


def cmd_l1norm(args):
    sc = load_scenario(args.config)
    theta = sc.plant.a - sc.ref.a_m
    value = an.linf_condition_norm(sc.ref, theta, sc.l1.k, args.quad_dt, args.horizon)
    ok = value < 1.0
    out = _kv([("k", float(sc.l1.k)), ("norm", value), ("condition_satisfied", ok)])
    atomic_write_text(args.out, out)
    sys.stdout.write(out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args):
    sc = load_scenario(args.config)
    res = an.stability_sweep(sc.plant, sc.ref, args.k, args.gamma, sc.integrator, sc.init)
    violations, exceptions = an.correspondence_violations(res)
    atomic_write_text(args.out, res.to_csv())
    sys.stdout.write(
        _kv([("violations", len(violations)), ("pi_hurwitz_all_diverged", " ".join(f"{k:g}" for k in exceptions))])
    )
    return EXIT_OK if not violations else EXIT_FAIL


def cmd_fragility(args):
    if args.config:
        integ = load_scenario(args.config).integrator
    else:
        integ = IntegratorConfig(1e-3, args.t_end, 100)
    a, b = an.fragility_demo(args.epsilon, integ)
    expect_b = b.completed if args.epsilon == 0 else not b.completed
    ok = a.completed and expect_b
    predicted = float(np.log(integ.blowup_threshold / args.epsilon)) if args.epsilon > 0 else float("inf")
    out = _kv(
        [
            ("epsilon", float(args.epsilon)),
            ("on_manifold_verdict", a.verdict.value),
            ("on_manifold_final_norm", float(np.max(np.abs(a.trace.y[-1])))),
            ("perturbed_verdict", b.verdict.value),
            ("perturbed_diverged_at", float(b.diverged_at) if b.diverged_at is not None else "none"),
            ("predicted_blowup_time", predicted),
            ("passed", ok),
        ]
    )
    atomic_write_text(args.out, out)
    sys.stdout.write(out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="l1equiv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help, config_required=True):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", required=config_required, help="scenario file")
        sp.add_argument("--out", required=True, help="output path")
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "simulate one closed loop and write a trace CSV")
    sp.add_argument("--arch", choices=["l1ac", "pi", "perturbed-pi"], default="l1ac")
    sp.add_argument("--estimator", choices=["true", "frozen", "scripted"], default="true")

    sp = add("equiv", cmd_equiv, "adaptive vs perturbed PI signal equivalence")
    sp.add_argument("--estimator", choices=["true", "frozen", "scripted", "all"], default="all")
    sp.add_argument("--tol", type=float, default=TOL.equivalence_gap)

    sp = add("charpoly", cmd_charpoly, "closed-loop characteristic polynomial identity")
    sp.add_argument("--k", type=float, default=None, help="override the scenario's k")
    sp.add_argument("--rtol", type=float, default=1e-9)

    sp = add("kc", cmd_kc, "critical PI gain by bisection")
    sp.add_argument("--k-lo", type=float, default=0.1)
    sp.add_argument("--k-hi", type=float, default=10.0)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("l1norm", cmd_l1norm, "induced L-infinity norm condition")
    sp.add_argument("--quad-dt", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=None)

    sp = add("sweep", cmd_sweep, "(k, gamma) stability grid")
    sp.add_argument("--k", type=_grid, required=True, metavar="a:b:steps")
    sp.add_argument("--gamma", type=_grid, required=True, metavar="a:b:steps")

    sp = add("fragility", cmd_fragility, "initial-condition fragility demonstration", config_required=False)
    sp.add_argument("--epsilon", type=float, default=1e-6)
    sp.add_argument("--t-end", type=float, default=40.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except L1EquivError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
