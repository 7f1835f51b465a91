"""
``horncrit`` command-line front end.

Exit codes: 0 success, 2 inconclusive verdict, 3 invalid arguments,
4 numerical failure.  Settings may come from ``--config FILE`` (flat
``key=value`` lines); flags given on the command line win, and
``--dump-config`` prints the effective settings instead of running.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .io import dump_config, read_config, write_csv

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3, 4

SUBCOMMANDS = ("classify", "lyapunov", "simulate", "experiment", "capacity",
               "check-assumptions", "verify-all")
EXPERIMENTS = ("localtime", "cycle", "twosphere", "supermartingale")
# settings that never go into a dumped config
_TRANSIENT_KEYS = {"config", "dump_config", "subcommand"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _auto_or_float(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _global_flags():
    p = _Parser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads; results do not depend on it (default 1)")
    g.add_argument("--config", metavar="FILE", help="key=value settings file")
    g.add_argument("--out", metavar="FILE", help="CSV output")
    g.add_argument("--svg", metavar="FILE", help="SVG line plot (experiments)")
    g.add_argument("--evidence", metavar="FILE", help="CSV evidence table (classify)")
    g.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration and exit")
    return p


def _domain_flags():
    p = _Parser(add_help=False)
    g = p.add_argument_group("domain")
    g.add_argument("--l", type=int, default=None, help="dimension of x")
    g.add_argument("--m", type=int, default=None, help="dimension of z")
    g.add_argument("--profile", choices=("power", "logpower", "constant"), default=None,
                   help="profile family")
    g.add_argument("--gamma", type=float, default=None, help="exponent (power, logpower)")
    g.add_argument("--a", type=float, default=None,
                   help="height (constant profile); ball radius for localtime/cycle")
    return p


def build_parser() -> argparse.ArgumentParser:
    glob = _global_flags()
    dom = _domain_flags()
    parser = _Parser(prog="horncrit", description="Recurrence and transience of reflected "
                     "Brownian motion in domains {|z| < H(|x|)}.")
    parser.add_argument("--version", action="version", version=f"horncrit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("classify", parents=[glob, dom], help="integral test verdict")
    p.add_argument("--s0", type=float, default=10.0, help="lower integration limit (default 10)")
    p.add_argument("--kmax", type=int, default=40, help="largest dyadic block exponent")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--volume", action="store_true", help="positive-recurrence test")
    mode.add_argument("--sign", choices=("plus", "minus"), default=None,
                      help="also report the growth of the Lyapunov level function")

    p = sub.add_parser("lyapunov", parents=[glob, dom], help="tabulate f+ or f-")
    p.add_argument("--sign", choices=("plus", "minus"), default="plus")
    p.add_argument("--s0", type=_auto_or_float, default="auto", help="'auto' or a value")
    p.add_argument("--smax", type=float, default=1e10)
    p.add_argument("--verify", choices=("none", "all"), default="none")

    p = sub.add_parser("simulate", parents=[glob, dom], help="reflected Brownian paths")
    p.add_argument("--mode", choices=("full", "reduced"), default="reduced")
    p.add_argument("--start-rho", type=float, default=2.0)
    p.add_argument("--start-r", type=float, default=0.0)
    p.add_argument("--inner", type=float, default=1.0)
    p.add_argument("--outer", type=float, default=math.inf)
    p.add_argument("--T", type=float, default=math.inf, help="time budget per path")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--paths", type=_positive_int, default=1000)

    p = sub.add_parser("experiment", parents=[glob, dom], help="Monte Carlo studies")
    p.add_argument("kind", choices=EXPERIMENTS)
    p.add_argument("--paths", type=_positive_int, default=None,
                   help="paths (cycles for 'cycle'); default depends on the study")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=50.0, help="localtime horizon")
    p.add_argument("--rho0", type=float, default=1.0, help="twosphere inner radius")
    p.add_argument("--rho1", type=float, default=2.0, help="twosphere start radius")
    p.add_argument("--R", type=_float_list, default=[4.0, 8.0, 16.0, 32.0],
                   help="twosphere outer radii, comma separated")
    p.add_argument("--mode", choices=("full", "reduced"), default="reduced")
    p.add_argument("--sign", choices=("plus", "minus"), default="plus",
                   help="supermartingale level function")
    p.add_argument("--start-rho", type=float, default=None,
                   help="supermartingale start (default 4 s0)")
    p.add_argument("--t-grid", type=_float_list, default=[0.0, 1.0, 2.0, 4.0, 8.0])
    p.add_argument("--convergence", action="store_true", help="also run at h/2")

    p = sub.add_parser("capacity", parents=[glob, dom], help="Dirichlet energy sequence")
    p.add_argument("--n", type=_float_list, default=[4.0, 8.0, 16.0, 32.0])
    p.add_argument("--mesh-h", type=_auto_or_float, default="auto")
    p.add_argument("--rho-in", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("check-assumptions", parents=[glob, dom], help="regularity of H")
    p.add_argument("--smax", type=float, default=1e6)
    p.add_argument("--tol", type=float, default=1e-3)

    p = sub.add_parser("verify-all", parents=[glob, dom], help="invariant pass/fail matrix")
    p.add_argument("--smax", type=float, default=1e10)
    p.add_argument("--no-simulate", action="store_true", help="skip path checks")
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, argv):
    """Load ``--config`` (if present) as defaults of the chosen subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        cfg = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    except ValueError as exc:
        raise UsageError(str(exc))
    name = next((a for a in argv if a in SUBCOMMANDS), None)
    if name is None:
        name = cfg.get("subcommand")
        if name not in SUBCOMMANDS:
            raise UsageError("no subcommand on the command line or in the config file")
        argv = [name] + list(argv)
    if name == "experiment" and "kind" in cfg:
        i = argv.index("experiment")
        if not (len(argv) > i + 1 and argv[i + 1] in EXPERIMENTS):
            argv = argv[:i + 1] + [cfg["kind"]] + argv[i + 1:]
    sp = _subparser(parser, name)
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if dest in ("subcommand", "kind"):
            continue
        if dest not in actions:
            raise UsageError(f"unknown config key {key!r} for {name}")
        act = actions[dest]
        try:
            if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                defaults[dest] = _bool(val)
            elif val == "" or val == "None":
                defaults[dest] = None
            else:
                defaults[dest] = act.type(val) if act.type else val
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"bad config value for {key!r}: {exc}")
        if act.choices is not None and defaults[dest] not in act.choices:
            raise UsageError(f"bad config value for {key!r}: {val!r}")
    sp.set_defaults(**defaults)
    return argv


def effective_config(args) -> dict:
    """Settings to re-create this run, as written by ``--dump-config``."""
    cfg = {"subcommand": args.subcommand}
    for key, val in sorted(vars(args).items()):
        if key in _TRANSIENT_KEYS or val is None:
            continue
        cfg[key] = val
    return cfg


def _domain(args, needed=True):
    from .classify import DomainSpec
    from .profile import make_profile
    if args.profile is None or args.l is None or args.m is None:
        if needed:
            raise UsageError("--l, --m and --profile are required")
        return None
    if args.profile in ("power", "logpower") and args.gamma is None:
        raise UsageError(f"--profile {args.profile} needs --gamma")
    if args.profile == "constant" and args.a is None:
        raise UsageError("--profile constant needs --a")
    try:
        prof = make_profile(args.profile, gamma=args.gamma, a=args.a)
        return DomainSpec(args.l, args.m, prof)
    except ValueError as exc:
        raise UsageError(str(exc))


# ----------------------------------------------------------------------------
# subcommands

def _cmd_classify(args):
    from .classify import (INCONCLUSIVE, classify_positive_recurrence, classify_transience)
    dom = _domain(args)
    if args.volume:
        res = classify_positive_recurrence(dom, args.s0, args.kmax)
    else:
        res = classify_transience(dom, args.s0, args.kmax)
    print(res.verdict)
    if args.evidence:
        write_csv(args.evidence, ("k", "I_k", "ratio"), res.integral.evidence_rows())
    if args.sign:
        from .lyapunov import build_f
        f = build_f(dom, args.sign)
        print(f"f{'+' if args.sign == 'plus' else '-'} {f.growth}")
    return EXIT_INCONCLUSIVE if res.verdict == INCONCLUSIVE else EXIT_OK


def _max_violation_per_s(lyap, s, n_r=11):
    from .lyapunov import _coefficients
    frac = np.linspace(0.0, 1.0, n_r)
    S, Fr = np.meshgrid(s, frac, indexing="ij")
    co = _coefficients(lyap.dom, Fr * lyap.dom.profile(S), S)
    _, fp, fpp = lyap.evaluate(S.ravel())
    half = 0.5 * (co.A * fpp.reshape(S.shape) + co.B * fp.reshape(S.shape))
    return np.maximum(np.max(lyap.sgn * half, axis=1), 0.0) + 0.0


def _cmd_lyapunov(args):
    from .lyapunov import build_f
    from .verify import format_matrix, verify_all
    dom = _domain(args)
    lyap = build_f(dom, args.sign, args.s0, args.smax)
    print(f"s0={lyap.s0:.17g} C0={lyap.C0:.6g} C1={lyap.C1:.6g}")
    print(lyap.growth)
    if args.out:
        tab = lyap.table()
        viol = _max_violation_per_s(lyap, np.minimum(tab[:, 0], lyap.s_max))
        write_csv(args.out, ("s", "Gamma", "f", "fprime", "maxDeltaU_violation"),
                  [(*map(float, row), float(v)) for row, v in zip(tab, viol)])
    code = EXIT_INCONCLUSIVE if lyap.growth == "inconclusive" else EXIT_OK
    if args.verify == "all":
        checks = verify_all(dom, seed=args.seed, s_max=args.smax, simulate=False)
        print(format_matrix(checks))
        if any(c.passed is False for c in checks):
            return EXIT_NUMERICAL
    return code


def _cmd_simulate(args):
    from .simulate import HIT_INNER, HIT_OUTER, TIME_BUDGET, simulate_paths
    dom = _domain(args)
    try:
        batch = simulate_paths(dom, args.mode, args.start_rho, args.h, args.paths, args.seed,
                               inner=args.inner, outer=args.outer, T=args.T,
                               start_r=args.start_r)
    except ValueError as exc:
        raise UsageError(str(exc))
    for cause in (HIT_INNER, HIT_OUTER, TIME_BUDGET):
        p, se = batch.frequency(cause)
        print(f"{cause} {p:.6f} +- {se:.6f}")
    if args.out:
        write_csv(args.out, ("path_id", "exit_cause", "t", "L", "steps"),
                  [(i, batch.cause[i], float(batch.t[i]), float(batch.L[i]), int(batch.steps[i]))
                   for i in range(batch.n)])
    return EXIT_OK


def _print_table(tab):
    for r in tab.rows:
        oracle = "" if math.isnan(r["oracle"]) else f"  oracle {r['oracle']:.6g}"
        est = "nan" if math.isnan(r["estimate"]) else f"{r['estimate']:.6g}"
        print(f"{r['parameter']:>14s}  {r['quantity']:<16s} {est} +- {r['stderr']:.3g}{oracle}")


def _cmd_experiment(args):
    from . import experiments as ex
    if args.kind in ("localtime", "cycle"):
        if args.m is None:
            raise UsageError(f"experiment {args.kind} needs --m")
        a = 1.0 if args.a is None else args.a
        if a <= 0 or args.m < 1:
            raise UsageError("need a > 0 and m >= 1")
        if args.kind == "localtime":
            tab = ex.local_time_rate(a, args.m, args.t_end, args.paths or 5000, args.h, args.seed,
                                     convergence=args.convergence)
            quantity = "rate"
        else:
            tab = ex.cycle_identity(a, args.m, args.paths or 20000, args.h, args.seed)
            quantity = "ratio"
    elif args.kind == "twosphere":
        dom = _domain(args)
        if not args.rho0 < args.rho1 < min(args.R):
            raise UsageError("need rho0 < rho1 < min(R)")
        tab = ex.two_sphere(dom, args.rho0, args.rho1, args.R, args.paths or 10000, args.h,
                            args.seed, args.mode, convergence=args.convergence)
        quantity = "p_inner_first"
        if "trend" in tab.notes:
            print(f"trend: {tab.notes['trend']}")
    else:
        from .lyapunov import build_f
        dom = _domain(args)
        lyap = build_f(dom, args.sign)
        start = 4.0 * lyap.s0 if args.start_rho is None else args.start_rho
        tab = ex.supermartingale_check(lyap, start, args.t_grid, args.paths or 2000, args.h,
                                       args.seed, mode=args.mode)
        quantity = "E_u"
        print(f"monotone within 3 stderr: {tab.notes.get('ok')}")
    _print_table(tab)
    if args.out:
        tab.write_csv(args.out)
    if args.svg:
        tab.plot_svg(args.svg, quantity)
    return EXIT_OK


def _cmd_capacity(args):
    from .capacity import capacity_sequence
    from .classify import INCONCLUSIVE
    dom = _domain(args)
    res = capacity_sequence(dom, args.n, args.mesh_h, args.rho_in, args.tol)
    for row in res.rows():
        print("n=%g cells=%d ell=%.10g iters=%d residual=%.3g" % row[:5])
    print(f"best model: {res.best}")
    print(res.verdict)
    if args.out:
        write_csv(args.out, ("n", "cells", "ell_n", "iters", "residual", "fit_model"),
                  list(res.rows()))
    return EXIT_INCONCLUSIVE if res.verdict == INCONCLUSIVE else EXIT_OK


def _cmd_check_assumptions(args):
    from .profile import check_assumption_H
    dom = _domain(args)
    rep = check_assumption_H(dom.profile, args.smax, args.tol)
    for c in rep.conditions:
        print(f"{c.verdict:12s} {c.name}")
    print(rep.verdict)
    return EXIT_INCONCLUSIVE if rep.verdict == "inconclusive" else EXIT_OK


def _cmd_verify_all(args):
    from .verify import format_matrix, verify_all
    dom = _domain(args)
    checks = verify_all(dom, seed=args.seed, s_max=args.smax, simulate=not args.no_simulate)
    print(format_matrix(checks))
    failed = sum(c.passed is False for c in checks)
    print(f"{len(checks) - failed} of {len(checks)} checks without failure")
    return EXIT_NUMERICAL if failed else EXIT_OK


_COMMANDS = {
    "classify": _cmd_classify,
    "lyapunov": _cmd_lyapunov,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
    "capacity": _cmd_capacity,
    "check-assumptions": _cmd_check_assumptions,
    "verify-all": _cmd_verify_all,
}


def main(argv=None) -> int:
    """Parse ``argv`` (default ``sys.argv[1:]``), run the subcommand, return the exit code."""
    from .capacity import ConvergenceError
    from .lyapunov import AdmissibilityError
    from .simulate import ProjectionError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.dump_config:
            sys.stdout.write(dump_config(effective_config(args)))
            return EXIT_OK
        return _COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:       # --help / --version
        return int(exc.code or 0)
    except (AdmissibilityError, ConvergenceError, ProjectionError, FloatingPointError,
            ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
