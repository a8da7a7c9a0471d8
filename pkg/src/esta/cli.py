"""Command-line interface: ``esta {correct,simulate,sweep,threshold,validate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical accuracy
failure, 3 failed check.
"""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config
from .engine import EstaCorrector
from .exceptions import AccuracyError, ConfigError, DomainError, EstaError
from .experiments import run_case, sweep_tf, threshold_time

EXIT_OK, EXIT_USAGE, EXIT_ACCURACY, EXIT_CHECK = 0, 1, 2, 3
CSV_COLUMNS = ("t_f", "F_sta", "F_esta", "F_esta_idealized", "F_sta_idealized")


def _fmt(value):
    return "%.17g" % value


def write_csv(sweep, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in sweep.rows:
            writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])


def _json_float(v):
    v = float(v)
    return v if np.isfinite(v) else None


def result_document(sweep, config, timings=None):
    """Everything needed to reproduce and interpret a sweep, as plain JSON data."""
    rows = []
    for r in sweep.rows:
        rows.append({**{c: _json_float(getattr(r, c)) for c in CSV_COLUMNS},
                     "epsilon": r.epsilon,
                     "diagnostics": {k: (_json_float(v) if isinstance(v, (float, np.floating)) else v)
                                     for k, v in r.diagnostics.items()},
                     "error": r.error})
    return {"version": __version__, "config": config.to_dict(), "metadata": sweep.metadata,
            "timings": timings or {}, "rows": rows}


def emit_results(sweep, fmt, path, config, timings=None):
    """Write ``sweep`` as CSV (plus a ``.json`` sidecar) or as a single JSON file.

    Returns the list of written paths.
    """
    path = Path(path)
    doc = result_document(sweep, config, timings)
    try:
        if fmt == "csv":
            write_csv(sweep, path)
            sidecar = path.with_suffix(".json")
            sidecar.write_text(json.dumps(doc, indent=2, default=_default) + "\n")
            return [path, sidecar]
        if fmt == "json":
            path.write_text(json.dumps(doc, indent=2, default=_default) + "\n")
            return [path]
    except OSError as exc:
        raise OSError(f"{path}: cannot write results ({exc.strerror})") from exc
    raise ConfigError(f"format: expected 'csv' or 'json', got {fmt!r}")


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of run settings")
    common.add_argument("--case", choices=("two_level", "single_transport", "two_ion"))
    common.add_argument("--tf-min", type=float, dest="tf_min")
    common.add_argument("--tf-max", type=float, dest="tf_max")
    common.add_argument("--tf-steps", type=int, dest="tf_steps")
    common.add_argument("--modes", type=int, dest="n_modes", help="excited modes N")
    common.add_argument("--out", help="output path")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--validate-level", choices=("fast", "full"), dest="validate_level")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="esta", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("correct", "print lambda0, epsilon and lambda_s"),
                            ("simulate", "exact fidelities of STA and eSTA at one final time"),
                            ("sweep", "fidelity versus final time"),
                            ("threshold", "threshold times of a sweep"),
                            ("validate", "run the self-check suite")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("correct", "simulate"):
            p.add_argument("--tf", type=float, help="final time (default: tf_min)")
    return parser


def _overrides(args):
    keys = ("case", "tf_min", "tf_max", "tf_steps", "n_modes", "out", "format", "validate_level")
    out = {k: getattr(args, k) for k in keys}
    out["verbosity"] = args.verbose or None
    return out


def _cmd_correct(config, args):
    t_f = args.tf or float(config.tf_values()[0])
    est = EstaCorrector(config.n_modes, config.quad_rtol).fit(config.model(), t_f)
    for label, vec in (("lambda0", est.lambda0_), ("epsilon", est.epsilon_),
                       ("lambda_s", est.lambda_s_)):
        print(f"{label} = [{', '.join(_fmt(v) for v in vec)}]")
    print(f"fidelity_estimate = {_fmt(est.fidelity_estimate_)}")
    return EXIT_OK


def _cmd_simulate(config, args):
    t_f = args.tf or float(config.tf_values()[0])
    sta = run_case(config, "sta", t_f)
    esta = run_case(config, "esta", t_f)
    print(",".join(CSV_COLUMNS))
    print(",".join(_fmt(v) for v in (t_f, sta["F_system"], esta["F_system"],
                                     esta["F_idealized"], sta["F_idealized"])))
    return EXIT_OK


def _run_sweep(config):
    start = time.perf_counter()
    sweep = sweep_tf(config)
    timings = {"sweep_seconds": time.perf_counter() - start,
               "row_seconds": [r.diagnostics.get("seconds") for r in sweep.rows]}
    return sweep, timings


def _cmd_sweep(config, args):
    sweep, timings = _run_sweep(config)
    if config.out:
        for path in emit_results(sweep, config.format, config.out, config, timings):
            print(f"wrote {path}")
    else:
        write_csv(sweep, "/dev/stdout")
    failed = [r for r in sweep.rows if r.error]
    for r in failed:
        print(f"row t_f={_fmt(r.t_f)} failed: {r.error}", file=sys.stderr)
    return EXIT_ACCURACY if failed else EXIT_OK


def _cmd_threshold(config, args):
    sweep, timings = _run_sweep(config)
    level = config.threshold_level
    for label, column in (("STA", "F_sta"), ("eSTA", "F_esta")):
        t = threshold_time(sweep, level, column)
        print(f"t_{level:g}({label}) = {'not reached' if t is None else _fmt(t)}")
    if config.out:
        emit_results(sweep, config.format, config.out, config, timings)
    return EXIT_ACCURACY if any(r.error for r in sweep.rows) else EXIT_OK


def _cmd_validate(config, args):
    from .validation import run_checks

    results = run_checks(config.validate_level)
    for check in results:
        print(check.line())
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {"correct": _cmd_correct, "simulate": _cmd_simulate, "sweep": _cmd_sweep,
            "threshold": _cmd_threshold, "validate": _cmd_validate}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config, _overrides(args))
        return COMMANDS[args.command](config, args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AccuracyError as exc:
        print(f"numerical accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except (EstaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
