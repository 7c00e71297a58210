"""``qfi`` command-line entry point.

Exit codes: 0 success, 2 config validation failure, 3 numeric invariant
violation, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import QfiError, ValidationError
from .families import unitary_family
from .metrics import metric_report, sub_qfi_unitary
from .scenario import (
    dumps_report,
    has_violation,
    load_scenario,
    run_grouping,
    run_scenario,
    validate_config,
    write_csv,
)
from .states import DensityOperator, matrix_from_json

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("qfikit")


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path):
    try:
        return load_scenario(path)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"{path}: invalid JSON ({exc})"]) from exc


def cmd_run(args) -> int:
    report = run_scenario(_load(args.scenario), jobs=args.jobs, seed=args.seed)
    _emit(dumps_report(report), args.out)
    if args.csv:
        write_csv(report, args.csv)
    s = report["summary"]
    log.info("%d points, %d errors, %d with violations", s["n_points"], s["n_errors"],
             s["n_violations"])
    return EXIT_VIOLATION if has_violation(report) else EXIT_OK


def cmd_group(args) -> int:
    report = run_grouping(_load(args.scenario), seed=args.seed)
    _emit(dumps_report(report), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    validate_config(_load(args.scenario))
    print(f"{args.scenario}: ok")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        with open(args.state) as fh:
            rho0 = DensityOperator(matrix_from_json(json.load(fh)))
        with open(args.generator) as fh:
            h = matrix_from_json(json.load(fh))
        fam = unitary_family(rho0.matrix, h)
    except (json.JSONDecodeError, QfiError) as exc:
        raise ValidationError([str(exc)]) from exc
    rep = metric_report(fam, args.x).as_dict()
    rep["sub_qfi_unitary"] = sub_qfi_unitary(rho0.matrix, h)
    rep["method_tags"].append("sub_qfi_unitary:closed-form")
    _emit(json.dumps(rep, indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qfikit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sweep a scenario and audit the transfer chain")
    p.add_argument("scenario")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="also write an (x, F_a, F_b, F_sub_b, cfi_a) table")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("group", help="reduce the scenario's projectors by lossless grouping")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("metrics", help="one-shot QFI / sub-QFI of exp(-ixH) rho exp(ixH)")
    p.add_argument("state", help="density matrix JSON {dim, re, im}")
    p.add_argument("generator", help="Hermitian generator JSON {dim, re, im}")
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QFI_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
