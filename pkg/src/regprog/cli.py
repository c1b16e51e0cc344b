"""``regprog`` command-line driver."""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import builders, circuits, matpow
from .field import FieldError
from .oracles import OracleError
from .poly import PolyError, parse_poly
from .report import SpaceReport, profile_table
from .rpir import (ProgramParseError, RegisterState, StructureError, execute, output_deltas,
                   parse, serialize, verify_clean)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _poly(text: str, num_vars: int | None = None):
    return parse_poly(text, num_vars=num_vars)


def _csv_ints(text: str) -> list:
    try:
        return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _matrix(text: str) -> list:
    rows = [_csv_ints(r) for r in text.split(";")]
    if any(len(r) != len(rows) for r in rows):
        raise UsageError("matrix must be square, rows separated by ';'")
    return rows


def _emit(args, built) -> int:
    text = serialize(built.program)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(profile_table(built))
    return EXIT_OK


def _read_program(path: str | None):
    if path in (None, "-"):
        text = sys.stdin.read()
    else:
        with open(path) as fh:
            text = fh.read()
    return parse(text)


# -- subcommands -----------------------------------------------------------------

def cmd_build_univariate(args):
    return _emit(args, builders.build_univariate(_poly(args.poly, 1), args.p))


def cmd_build_univariate_set(args):
    return _emit(args, builders.build_univariate_set([_poly(s, 1) for s in args.poly], args.p))


def cmd_build_waring(args):
    return _emit(args, builders.build_waring(_poly(args.poly, args.vars), args.p))


def cmd_build_general(args):
    polys = [_poly(s, args.vars) for s in args.poly]
    n = max(P.num_vars for P in polys)
    polys = [_poly(s, n) for s in args.poly]
    return _emit(args, builders.build_general(polys, args.p, lift=args.lift))


def cmd_build_symmetric(args):
    return _emit(args, builders.build_symmetric_bool(_csv_ints(args.truth), args.p))


def cmd_build_bool_rep(args):
    return _emit(args, builders.build_bool_rep(_poly(args.poly, args.vars), args.p,
                                               nonzero=args.nonzero))


def cmd_build_interp(args):
    polys = [_poly(s, args.vars) for s in args.poly]
    n = max(P.num_vars for P in polys)
    return _emit(args, builders.build_interpolation_eval([_poly(s, n) for s in args.poly],
                                                         args.p))


def cmd_build_circuit(args):
    with open(args.netlist) as fh:
        C = circuits.parse_netlist(fh.read())
    return _emit(args, circuits.compile_circuit(C, args.block_depth, args.p,
                                                nonzero=args.nonzero))


def cmd_build_matpow(args):
    mode = args.mode or ("boosted" if args.delta else ("small" if args.d < args.p else "lifted"))
    if mode == "boosted":
        if not args.delta:
            raise UsageError("boosted mode needs --delta")
        built = matpow.build_matpow_boosted(args.n, args.p, args.d, args.delta)
    elif mode == "small":
        built = matpow.build_matpow_small(args.n, args.p, args.d)
    else:
        built = matpow.build_matpow_lifted(args.n, args.p, args.d)
    return _emit(args, built)


def cmd_verify(args):
    P = _read_program(args.program)
    if P.oracle is None:
        raise UsageError("program has no oracle line to verify against")
    report = verify_clean(P, trials=args.trials, seed=args.seed,
                          exhaustive=True if args.exhaustive else None,
                          taus_per_input=args.taus, jobs=args.jobs)
    if report.passed:
        print(f"PASS {P.name}: {report.checked} checks ({report.mode})")
        return EXIT_OK
    cex = report.counterexample
    print(f"FAIL {P.name}: after {report.checked} checks ({report.mode})")
    print(f"  init     = {[list(v) for v in cex['init']]}")
    print(f"  x        = {list(cex['x'])}")
    print(f"  expected = {cex['expected']}")
    print(f"  deltas   = {cex['deltas']}")
    if cex["unrestored"]:
        print(f"  unrestored registers = {cex['unrestored']}")
    return EXIT_FAIL


def cmd_eval(args):
    P = _read_program(args.program)
    x = _csv_ints(args.input)
    if len(x) != P.num_inputs:
        raise UsageError(f"program takes {P.num_inputs} inputs, got {len(x)}")
    if args.init == "zero":
        init = RegisterState.zeros(P)
    elif args.init == "random":
        init = RegisterState.random(P, np.random.default_rng(args.seed))
    else:
        flat = _csv_ints(args.init)
        sizes = [b.size for b in P.banks]
        if len(flat) != sum(sizes):
            raise UsageError(f"--init needs {sum(sizes)} values")
        vals, pos = [], 0
        for s in sizes:
            vals.append(flat[pos:pos + s])
            pos += s
        init = RegisterState.from_lists(P, vals)
    final, prof = execute(P, init, x)
    deltas = output_deltas(P, init, final)
    print("deltas: " + ",".join(str(d) for d in deltas))
    moved = [(P.banks[b].name, r) for b, bank in enumerate(P.banks) for r in range(bank.size)
             if (b, r) not in set(P.outputs) and final.values[b][r] != init.values[b][r]]
    print("restored: " + ("yes" if not moved else f"no {moved}"))
    print("recursive calls: " + ",".join(str(c) for c in prof.recursive_calls))
    return EXIT_OK


def cmd_space_report(args):
    if args.program:
        rep = SpaceReport.for_program(_read_program(args.program))
    else:
        if None in (args.t, args.s, args.n, args.field):
            raise UsageError("need --t --s --n --field, or --program")
        rep = SpaceReport(args.t, args.s, args.n, args.field)
    sys.stdout.write(rep.render())
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regprog",
                                 description="Build and check clean register programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def builder(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-o", "--output", help="write the program here instead of stdout")
        sp.set_defaults(func=func)
        return sp

    sp = builder("build-univariate", cmd_build_univariate, "univariate polynomial program")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--poly", required=True, help="polynomial in x1, e.g. 'x1^2+1'")

    sp = builder("build-univariate-set", cmd_build_univariate_set, "several univariate outputs")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--poly", action="append", required=True)

    sp = builder("build-waring", cmd_build_waring, "homogeneous polynomial via linear forms")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--poly", required=True)
    sp.add_argument("--vars", type=int)

    sp = builder("build-general", cmd_build_general, "any polynomial, optionally lifted")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--poly", action="append", required=True)
    sp.add_argument("--vars", type=int)
    sp.add_argument("--lift", action="store_true")

    sp = builder("build-symmetric", cmd_build_symmetric, "symmetric Boolean function")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--truth", required=True, help="g(0),...,g(n) as bits, e.g. 0,1,1,1")

    sp = builder("build-bool-rep", cmd_build_bool_rep, "Boolean function from a representation")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--p", type=int)
    sp.add_argument("--vars", type=int)
    sp.add_argument("--nonzero", choices=["digits", "direct"], default="digits")

    sp = builder("build-interp", cmd_build_interp, "interpolation-based evaluation")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--poly", action="append", required=True)
    sp.add_argument("--vars", type=int)

    sp = builder("build-circuit", cmd_build_circuit, "compile a SAC netlist")
    sp.add_argument("--netlist", required=True)
    sp.add_argument("--block-depth", type=int, required=True)
    sp.add_argument("--p", type=int)
    sp.add_argument("--nonzero", choices=["digits", "direct"], default="direct")

    sp = builder("build-matpow", cmd_build_matpow, "matrix powering")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--delta", type=int)
    sp.add_argument("--mode", choices=["small", "lifted", "boosted"])

    sp = sub.add_parser("verify", help="check cleanness against the program's oracle")
    sp.add_argument("--program", help="program file (default: stdin)")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--exhaustive", action="store_true")
    sp.add_argument("--taus", type=int, default=1, help="random states per input when enumerating")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("eval", help="run a program once and print output deltas")
    sp.add_argument("--program", help="program file (default: stdin)")
    sp.add_argument("--input", required=True, help="comma-separated inputs")
    sp.add_argument("--init", default="zero", help="zero, random, or comma-separated values")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("space-report", help="pure and catalytic space, unit constants")
    sp.add_argument("--t", type=int)
    sp.add_argument("--s", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--field", type=int, help="field size |R|")
    sp.add_argument("--program")
    sp.set_defaults(func=cmd_space_report)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, builders.BuildError, FieldError, PolyError, ProgramParseError,
            StructureError, OracleError, circuits.NetlistError, matpow.BudgetError,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
