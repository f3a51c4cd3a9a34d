"""Command-line front end.

Three subcommands: ``test`` runs an aligned rank-based interaction test
on a CSV dataset against an explicit calibration file, ``calibrate``
generates a calibration file, and ``power`` runs a power study from a
JSON config.  Output is structured ``key: value`` text, one fact per
line, so scripts need no parser beyond line splitting.

Exit codes: 0 success; 1 I/O failure; 2 argument or validation error;
3 calibration mismatch or missing calibration.
"""

from __future__ import annotations

import argparse
import sys

from .calibration import (
    calibrate_null,
    critical_value,
    load_calibration,
    p_value,
    save_calibration,
)
from .crossed import apcss
from .errors import (
    CalibrationMismatchError,
    CalibrationMissingError,
    CorruptCalibrationError,
    UnsupportedDesignError,
)
from .model import AlignmentMethod, LayoutDims, read_data_csv
from .simulate import load_power_config, run_power_study, write_power_csv

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_CALIBRATION = 3


def _emit(pairs) -> None:
    for key, value in pairs:
        print(f"{key}: {value}")


def _cmd_test(args) -> int:
    table = read_data_csv(args.input)
    cal = load_calibration(args.calibration)
    method = AlignmentMethod(args.method)
    result = apcss(table, method, cal)
    crit = critical_value(cal, args.alpha)
    p = p_value(cal, result.statistic)
    reject = result.statistic > crit
    _emit(
        [
            ("test", result.variant),
            ("input", args.input),
            ("layout", table.dims),
            ("method", method.value),
            ("apccrad", repr(result.apccrad)),
            ("apcrcad", repr(result.apcrcad)),
            ("apccrad_star", repr(result.apccrad_star)),
            ("apcrcad_star", repr(result.apcrcad_star)),
            ("statistic", repr(result.statistic)),
            ("alpha", repr(float(args.alpha))),
            ("critical_value", repr(crit)),
            ("p_value", repr(p)),
            ("decision", "reject" if reject else "fail-to-reject"),
        ]
    )
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    dims = LayoutDims(args.I, args.J, args.K)
    method = AlignmentMethod(args.method)
    output = args.output or f"cal_{dims}_{method.value}.json"
    cal = calibrate_null(dims, method, args.n1, args.n2, args.seed, workers=args.workers)
    save_calibration(cal, output)
    _emit(
        [
            ("output", output),
            ("layout", dims),
            ("method", method.value),
            ("n_phase1", cal.n_phase1),
            ("n_phase2", cal.n_phase2),
            ("seed", cal.seed),
            ("e0_crad", repr(cal.e0_crad)),
            ("v0_crad", repr(cal.v0_crad)),
            ("e0_rcad", repr(cal.e0_rcad)),
            ("v0_rcad", repr(cal.v0_rcad)),
        ]
    )
    return EXIT_OK


def _cmd_power(args) -> int:
    config = load_power_config(args.config)
    calibrations = {}
    for method, path in (
        (AlignmentMethod.AVERAGE, config.calibration_average),
        (AlignmentMethod.MEDIAN, config.calibration_median),
    ):
        if path is not None:
            calibrations[method] = load_calibration(path)
    curves = run_power_study(config, calibrations, workers=args.workers)
    write_power_csv(curves, args.output)
    _emit(
        [
            ("output", args.output),
            ("layout", config.dims),
            ("tests", ",".join(config.tests)),
            ("magnitudes", len(config.magnitudes)),
            ("n_sims", config.n_sims),
            ("alpha", repr(config.alpha)),
            ("seed", config.seed),
        ]
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apcss",
        description=(
            "Aligned rank-based tests for interaction in balanced two-way layouts"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="run an interaction test on a CSV dataset")
    test.add_argument("--input", required=True, help="CSV with columns i,j,k,y")
    test.add_argument(
        "--method",
        required=True,
        choices=[m.value for m in AlignmentMethod],
        help="alignment method: average (APCSSA) or median (APCSSM)",
    )
    test.add_argument("--alpha", type=float, default=0.05, help="significance level")
    test.add_argument("--calibration", required=True, help="calibration file path")
    test.set_defaults(func=_cmd_test)

    cal = sub.add_parser("calibrate", help="generate a null calibration file")
    cal.add_argument("--I", type=int, required=True, help="number of rows")
    cal.add_argument("--J", type=int, required=True, help="number of columns")
    cal.add_argument("--K", type=int, required=True, help="replications per cell")
    cal.add_argument(
        "--method",
        required=True,
        choices=[m.value for m in AlignmentMethod],
        help="alignment method to calibrate",
    )
    cal.add_argument("--n1", type=int, required=True, help="phase-1 replicates")
    cal.add_argument("--n2", type=int, required=True, help="phase-2 replicates")
    cal.add_argument("--seed", type=int, required=True, help="random seed")
    cal.add_argument(
        "--output", default=None, help="output path (default: cal_IxJxK_method.json)"
    )
    cal.add_argument(
        "--workers", type=int, default=None, help="worker processes (default: all cores)"
    )
    cal.set_defaults(func=_cmd_calibrate)

    power = sub.add_parser("power", help="run a power study from a JSON config")
    power.add_argument("--config", required=True, help="JSON power-study config")
    power.add_argument("--output", required=True, help="output CSV path")
    power.add_argument(
        "--workers", type=int, default=None, help="worker processes (default: all cores)"
    )
    power.set_defaults(func=_cmd_power)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CalibrationMismatchError, CalibrationMissingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (CorruptCalibrationError, UnsupportedDesignError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
