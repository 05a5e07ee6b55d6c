"""Command line entry point: ``qsde solve|verify|reconstruct|converge|coalg``.

Exit codes: 0 success, 1 a check failed, 2 configuration or guard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import coalgebra as coalg
from .cocycle import reconstruct_phi, table_from_coefficient, table_from_engine
from .coefficients import StructureError
from .engines import ENGINES, solve
from .guichardet import TruncationError, truncated_series
from .instance import SchemaError, parse_instance
from .semigroup import matrix_element
from .toyfock import GridError, ToyFock, convergence_table, discrete_kfg
from .verify import SUITES, Verifier

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
MIN_RATIO = 1.3
ZERO_ERROR = 1e-14


class ConfigError(Exception):
    pass


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _pair(inst, args):
    return inst.step_function(args.gprime), inst.step_function(args.g)


def cmd_solve(args) -> int:
    inst = parse_instance(args.instance)
    gp, g = _pair(inst, args)
    N = args.truncation or inst.engine["truncation"]
    slots = args.slots or inst.engine["slots"]
    start = time.perf_counter()
    if args.engine == "guichardet":
        result, tail = truncated_series(inst.phi, inst.kappa, gp, g, args.t, N)
        result.meta["tail_bound"] = tail
    elif args.engine == "toyfock":
        result = solve("toyfock", inst.phi, inst.kappa, gp, g, args.t, slots=slots)
        if args.t > 0 and slots % 2 == 0:
            # first-order scheme: the halved-grid difference estimates the error
            half = discrete_kfg(inst.phi, inst.kappa, gp, g, ToyFock(args.t, slots // 2, inst.d))
            result.meta["error_estimate"] = result.distance(half)
    else:
        result = solve(args.engine, inst.phi, inst.kappa, gp, g, args.t)
    record = result.to_record()
    record.update(engine=args.engine, gprime=args.gprime, g=args.g,
                  runtime_ms=1e3 * (time.perf_counter() - start))
    _emit(record, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = parse_instance(args.instance)
    if args.suite == "coalg" and inst.coalgebra is None:
        raise ConfigError("coalg suite requires a coalgebra section")
    if args.suite == "conjugate" and inst.involution is None:
        raise ConfigError("conjugate suite requires an involution")
    if args.truncation:
        inst.engine["truncation"] = args.truncation
    if args.slots:
        inst.engine["slots"] = args.slots
    report = Verifier(inst, args.seed, args.tol).run(args.suite)
    print(report.table())
    for rec in report.records:
        if rec.detail and not rec.passed:
            print(f"# {rec.name}: {rec.detail}")
    if args.out:
        _emit(report.to_dict(), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_reconstruct(args) -> int:
    inst = parse_instance(args.instance)
    exact = reconstruct_phi(table_from_coefficient(inst.phi)).to_coefficient()
    rebuilt = reconstruct_phi(table_from_engine(inst.phi)).to_coefficient()
    gp, g = _pair(inst, args)
    resolve = matrix_element(rebuilt, inst.kappa, gp, g, args.t).distance(
        matrix_element(inst.phi, inst.kappa, gp, g, args.t))
    payload = {
        "theta": [[[[float(z.real), float(z.imag)] for z in row] for row in blk]
                  for blk in rebuilt.theta.reshape(-1, inst.m, inst.m)],
        "roundtrip_residual": float(np.max(np.abs(exact.theta - inst.phi.theta))),
        "engine_residual": float(np.max(np.abs(rebuilt.theta - inst.phi.theta))),
        "resolve_residual": resolve,
    }
    _emit(payload, args.out)
    ok = payload["roundtrip_residual"] <= 1e-12 and resolve <= args.tol
    return EXIT_OK if ok else EXIT_FAIL


def parse_slots(text: str) -> list[int]:
    try:
        slots = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad slots list {text!r}") from None
    if not slots or any(b <= a for a, b in zip(slots, slots[1:])):
        raise ConfigError("slots must be a nonempty ascending list")
    return slots


def cmd_converge(args) -> int:
    inst = parse_instance(args.instance)
    slots = parse_slots(args.slots)
    gp, g = _pair(inst, args)
    rows = convergence_table(inst.phi, inst.kappa, gp, g, args.t, slots)
    print("slots\terror\tratio")
    ok = True
    for row in rows:
        ratio = row["ratio"]
        print(f"{row['slots']}\t{row['error']:.6e}\t{'' if ratio is None else f'{ratio:.4f}'}")
        if ratio is not None and row["error"] > ZERO_ERROR and ratio < MIN_RATIO:
            ok = False
    if args.out:
        _emit({"rows": rows, "passed": ok}, args.out)
    if not ok:
        print(f"# convergence ratio below {MIN_RATIO}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_coalg(args) -> int:
    inst = parse_instance(args.instance)
    if inst.coalgebra is None:
        raise ConfigError("instance has no coalgebra section")
    C, vphi = inst.coalgebra, inst.varphi
    rep = coalg.validate(C)
    if not rep.ok:
        _emit({"valid": False, "max_violation": rep.max_violation}, args.out)
        return EXIT_FAIL
    phi = coalg.induced_coefficient(C, vphi)
    gp, g = _pair(inst, args)
    lt = coalg.convolution_cocycle(C, vphi, gp, g, args.t)
    payload = {
        "valid": True,
        "localisation_dims": [coalg.localise(phi, np.eye(C.m)[i]).dim for i in range(C.m)],
        "l_t": [[float(z.real), float(z.imag)] for z in lt],
        "qsde_residual": coalg.convolution_residual(C, vphi, gp, g, args.t),
        "counit_slice_defect": coalg.counit_slice_defect(C, vphi, gp, g, args.t),
    }
    _emit(payload, args.out)
    ok = payload["qsde_residual"] <= 1e-9 and payload["counit_slice_defect"] <= 1e-11
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsde", description="Matrix elements of quantum stochastic cocycles.",
        epilog="exit codes: 0 success, 1 a check failed, 2 configuration or guard error")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_data=True):
        p.add_argument("--instance", required=True, metavar="PATH")
        p.add_argument("--out", default=None, metavar="PATH", help="write JSON here")
        if with_data:
            p.add_argument("--t", type=float, default=1.0, help="time (default 1)")
            p.add_argument("--gprime", default=None, metavar="NAME", help="step function g'")
            p.add_argument("--g", default=None, metavar="NAME", help="step function g")
        return p

    p = common(sub.add_parser("solve", help="compute a matrix-element map"))
    p.add_argument("--engine", choices=ENGINES, default="semigroup")
    p.add_argument("--truncation", type=int, default=None, help="series level N")
    p.add_argument("--slots", type=int, default=None, help="toy Fock slot count")
    p.set_defaults(func=cmd_solve)

    p = common(sub.add_parser("verify", help="run property checks"), with_data=False)
    p.add_argument("--suite", choices=("all",) + SUITES, default="all")
    p.add_argument("--tol", type=float, default=1e-10, help="bound for identity checks")
    p.add_argument("--seed", type=int, default=None, help="override the instance seed")
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("reconstruct", help="recover the generator from the process"))
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_reconstruct)

    p = common(sub.add_parser("converge", help="toy Fock error against slot count"))
    p.add_argument("--slots", default="8,16,32,64", help="comma separated ascending list")
    p.set_defaults(func=cmd_converge)

    p = common(sub.add_parser("coalg", help="convolution cocycle of the coalgebra section"))
    p.set_defaults(func=cmd_coalg)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SchemaError, TruncationError, GridError, StructureError,
            coalg.LocalisationError, FileNotFoundError, ValueError) as exc:
        print(f"qsde: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
