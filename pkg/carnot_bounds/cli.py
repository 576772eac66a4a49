"""
cli.py

Command line entry point: carnot info|validate|cohomology|rumin|isotropic|bounds|lab.

Results go to stdout as a readable table, JSON (--json) or CSV (--csv); log
records and error messages go to stderr. Exit codes: 0 success, 1 I/O error,
2 malformed or invalid algebra, 3 beyond capacity or unsupported step.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, TextIO

import numpy as np
import pandas as pd

try:
    # When imported as a module
    from .algebra_spec import CarnotAlgebra, SpecError, ValidationError, load_spec
    from .exterior import CapacityError, weight_table
    from .cohomology import compute_cohomology, verify_duality, table_frame, table_to_dict
    from .rumin import build_rumin, verify_rumin_identities, rumin_frame
    from .isotropic import (
        random_search, theta_data, cross_check_weight_vanishing, dimension_check, max_generic_k,
    )
    from .bounds import holder_report, report_to_dict, uppers_frame
    from .metric_lab import (
        StepUnsupported, ConvergenceError, volume_scaling_experiment, tube_experiment, cc_distance_path,
    )
    from .utils import format_fraction
    from .constants import *
except ImportError:
    # When run directly as a script
    from carnot_bounds.algebra_spec import CarnotAlgebra, SpecError, ValidationError, load_spec
    from carnot_bounds.exterior import CapacityError, weight_table
    from carnot_bounds.cohomology import compute_cohomology, verify_duality, table_frame, table_to_dict
    from carnot_bounds.rumin import build_rumin, verify_rumin_identities, rumin_frame
    from carnot_bounds.isotropic import (
        random_search, theta_data, cross_check_weight_vanishing, dimension_check, max_generic_k,
    )
    from carnot_bounds.bounds import holder_report, report_to_dict, uppers_frame
    from carnot_bounds.metric_lab import (
        StepUnsupported, ConvergenceError, volume_scaling_experiment, tube_experiment, cc_distance_path,
    )
    from carnot_bounds.utils import format_fraction
    from carnot_bounds.constants import *

logger = logging.getLogger(f"CARNOT.{__name__}")

SUBCOMMANDS = ["info", "validate", "cohomology", "rumin", "isotropic", "bounds", "lab"]
LAB_EXPERIMENTS = ["volume", "tube", "ccdist"]


@dataclass
class CommandRequest:
    subcommand: str
    input: str
    output: str = OUTPUT_TABLE
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"Unknown subcommand '{self.subcommand}'. Valid options: {SUBCOMMANDS}")
        if self.output not in (OUTPUT_TABLE, OUTPUT_JSON, OUTPUT_CSV):
            raise ValueError(f"Unknown output mode '{self.output}'")

    def option(self, name: str, default=None):
        value = self.options.get(name)
        return default if value is None else value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnot", description="Cohomology and Holder-exponent bounds "
                                                               "for Carnot Lie algebras")
    parser.add_argument("--version", action="version", version=VERSION_STRING)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="JSON algebra file or builtin:<name>[:<m>]")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--json", dest="output", action="store_const", const=OUTPUT_JSON)
    mode.add_argument("--csv", dest="output", action="store_const", const=OUTPUT_CSV)
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help=f"Random seed (default {DEFAULT_SEED})")

    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("info", parents=[common], help="Dimension, step, strata, Q and dim Lambda^{q,w}")
    sub.add_parser("validate", parents=[common], help="Check Jacobi, grading and generation")
    sub.add_parser("cohomology", parents=[common], help="dim H^{q,w} table and duality check")
    sub.add_parser("rumin", parents=[common], help="Rumin decomposition and its identities")

    iso = sub.add_parser("isotropic", parents=[common, seeded], help="Search a regular isotropic k-plane")
    iso.add_argument("--k", type=int, required=True)
    iso.add_argument("--trials", type=int, default=DEFAULT_TRIALS)

    bnd = sub.add_parser("bounds", parents=[common, seeded], help="Holder exponent bounds")
    bnd.add_argument("--search-k", type=int, nargs="*", default=None,
                     help="Plane dimensions to search for the richness bound")
    bnd.add_argument("--trials", type=int, default=DEFAULT_TRIALS)

    lab_options = argparse.ArgumentParser(add_help=False)
    lab_options.add_argument("--eps", type=float, nargs="+", default=None)
    lab_options.add_argument("--tau", type=float, default=DEFAULT_TAU)
    lab_options.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    lab_options.add_argument("--segments", type=int, default=DEFAULT_SEGMENTS)
    lab_options.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    lab_options.add_argument("--target", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))

    lab = sub.add_parser("lab", help="Metric experiments on step-2 groups")
    experiments = lab.add_subparsers(dest="experiment", required=True)
    for name in LAB_EXPERIMENTS:
        experiments.add_parser(name, parents=[common, seeded, lab_options])
    return parser


def _validate_options(request: CommandRequest):
    """Flag checks that argparse cannot express; run before any computation."""
    opts = request.options
    for name in ("trials", "samples", "restarts"):
        if name in opts and opts[name] is not None and opts[name] < 1:
            raise ValueError(f"--{name} must be >= 1, got {opts[name]}")
    if request.subcommand == "isotropic" and opts["k"] < 1:
        raise ValueError(f"--k must be >= 1, got {opts['k']}")
    if request.subcommand == "lab":
        if opts.get("tau") is not None and opts["tau"] <= 0:
            raise ValueError("--tau must be positive")
        if opts.get("eps") and min(opts["eps"]) <= 0:
            raise ValueError("--eps values must be positive")
        if opts["experiment"] == "ccdist" and opts.get("target") is None:
            raise ValueError("lab ccdist needs --target X Y Z")


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Fraction):
        return format_fraction(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def _emit(out: TextIO, request: CommandRequest, payload: dict, frame: pd.DataFrame, lines: List[str]):
    if request.output == OUTPUT_JSON:
        out.write(json.dumps(payload, indent=2, default=_json_default) + "\n")
    elif request.output == OUTPUT_CSV:
        frame.to_csv(out, index=False)
    else:
        for line in lines:
            out.write(line + "\n")
        if not frame.empty:
            out.write(frame.to_string(index=False) + "\n")


def _seed(request: CommandRequest) -> int:
    seed = request.option("seed", DEFAULT_SEED)
    if request.options.get("seed") is None:
        logger.info(f"No --seed given, using seed {seed}")
    return seed


def _info(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    table = weight_table(alg)
    payload = {"name": alg.name, "n": alg.n, "r": alg.r, "strata": list(alg.strata_dims), "Q": alg.Q,
               "weights": list(alg.weights), "labels": list(alg.labels),
               "lambda": {f"{q},{w}": int(table.loc[q, w]) for q in table.index for w in table.columns
                          if table.loc[q, w] != 0}}
    lines = [f"name: {alg.name}", f"n: {alg.n}", f"r: {alg.r}", f"strata: {list(alg.strata_dims)}",
             f"Q: {alg.Q}", "dim Lambda^{q,w} (rows q, columns w):"]
    lines.append(table.to_string())
    frame = table.reset_index() if request.output == OUTPUT_CSV else pd.DataFrame()
    _emit(out, request, payload, frame, lines)


def _cohomology(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    table = compute_cohomology(alg)
    duality = verify_duality(table, alg)
    payload = table_to_dict(table)
    payload["duality_passed"] = duality.passed
    frame = pd.DataFrame([{"q": q, "w": w, "dim": d} for (q, w), d in sorted(table.dims.items())])
    lines = [f"dim H^{{q,w}} for '{alg.name}' (rows q, columns w; '<NA>' where Lambda^{{q,w}} = 0):",
             table_frame(table).to_string(), f"betti: {table.betti_list()}",
             f"duality: {'passed' if duality.passed else 'FAILED'}"]
    _emit(out, request, payload, frame if request.output == OUTPUT_CSV else pd.DataFrame(), lines)


def _rumin(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    data = build_rumin(alg)
    report = verify_rumin_identities(data)
    frame = rumin_frame(data)
    payload = {"name": alg.name, "degrees": frame.to_dict(orient="records"),
               "identities": report.checks, "passed": report.passed}
    lines = [f"Rumin decomposition of '{alg.name}':", frame.to_string(index=False),
             f"identities: {'all passed' if report.passed else 'FAILED'}"]
    for check in report.failures():
        lines.append(f"  failed: {check['identity']} in degree {check['degree']} {check['detail']}")
    _emit(out, request, payload, frame if request.output == OUTPUT_CSV else pd.DataFrame(), lines)


def _isotropic(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    k, seed = request.options["k"], _seed(request)
    trials = request.option("trials", DEFAULT_TRIALS)
    theta = theta_data(alg)
    h = alg.strata_dims[0]
    plane = random_search(alg, k, trials=trials, seed=seed, theta=theta)
    payload = {"name": alg.name, "k": k, "seed": seed, "trials": trials, "found": plane is not None,
               "basis": plane.to_list() if plane is not None else None,
               "dimension_check": dimension_check(h, alg.n, k) if k <= h else False,
               "max_generic_k": max_generic_k(h, alg.n)}
    lines = [f"seed: {seed}", f"k: {k}",
             f"regular isotropic {k}-plane: {'found' if plane is not None else 'none'} in {trials} trial(s)"]
    frame = pd.DataFrame()
    if plane is not None:
        report = cross_check_weight_vanishing(alg, plane, theta=theta)
        payload.update({"vanishing": report.rows, "vanishing_passed": report.passed, "step_flag": report.step_flag})
        lines.append("basis: " + "; ".join("(" + ", ".join(v) + ")" for v in plane.to_list()))
        lines.append(f"weight vanishing: {'passed' if report.passed else 'FAILED'}"
                     + (" (step >= 3: d0-level regularity only)" if report.step_flag else ""))
        frame = pd.DataFrame(report.rows)
    _emit(out, request, payload, frame, lines)


def _bounds(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    table = compute_cohomology(alg)
    planes = []
    search_k = request.options.get("search_k")
    seed = None
    if search_k:
        seed = _seed(request)
        theta = theta_data(alg)
        trials = request.option("trials", DEFAULT_TRIALS)
        for k in search_k:
            plane = random_search(alg, k, trials=trials, seed=seed, theta=theta)
            if plane is not None:
                planes.append(plane)
    report = holder_report(alg, table, planes)
    payload = report_to_dict(report)
    if seed is not None:
        payload["seed"] = seed
    lines = [f"Holder exponent bounds for '{alg.name}' (n={alg.n}, r={alg.r}, Q={alg.Q}):",
             f"lower: {format_fraction(report.lower)}",
             f"best_upper: {format_fraction(report.best_upper)} ({report.best.label})",
             "W_alg (certified lower bounds for W_q): "
             + ", ".join(f"{q}: {w if w is not None else '-'}" for q, w in report.W_alg.items())]
    if seed is not None:
        lines.insert(0, f"seed: {seed}")
    _emit(out, request, payload, uppers_frame(report), lines)


def _lab(alg: CarnotAlgebra, request: CommandRequest, out: TextIO):
    opts = request.options
    seed = _seed(request)
    experiment = opts["experiment"]
    samples = request.option("samples", DEFAULT_SAMPLES)
    if experiment == "volume":
        result = volume_scaling_experiment(alg, eps_list=request.option("eps", DEFAULT_EPS),
                                           samples=samples, seed=seed)
        frame = result.frame[["parameter", "estimate", "stderr"]]
        payload = {"experiment": experiment, "seed": seed, "samples": samples, "slope": result.slope,
                   "Q": result.expected, "rows": frame.to_dict(orient="records")}
        lines = [f"seed: {seed}", f"fitted exponent: {result.slope:.4f} (Q = {result.expected})"]
    elif experiment == "tube":
        eps = request.option("eps", [DEFAULT_EPS[0]])
        tau = request.option("tau", DEFAULT_TAU)
        results = [tube_experiment(alg, eps=e, tau=tau, samples=samples, seed=seed) for e in eps]
        frame = pd.concat([r.frame().assign(eps=r.eps) for r in results], ignore_index=True)
        frame = frame[["eps", "parameter", "estimate", "stderr"]]
        payload = {"experiment": experiment, "seed": seed, "samples": samples, "tau": tau,
                   "rows": frame.to_dict(orient="records")}
        lines = [f"seed: {seed}", f"tau: {tau}"]
    else:
        path = cc_distance_path(alg, opts["target"], segments=request.option("segments", DEFAULT_SEGMENTS),
                                restarts=request.option("restarts", DEFAULT_RESTARTS), seed=seed)
        frame = path.restarts[["parameter", "estimate", "stderr"]] if path.restarts is not None else pd.DataFrame()
        payload = {"experiment": experiment, "seed": seed, "target": list(opts["target"]),
                   "length": path.length, "residual": path.residual}
        lines = [f"seed: {seed}", f"cc distance upper bound: {path.length:.6f}"]
    _emit(out, request, payload, frame, lines)


HANDLERS = {
    "info": _info,
    "cohomology": _cohomology,
    "rumin": _rumin,
    "isotropic": _isotropic,
    "bounds": _bounds,
    "lab": _lab,
}


def run(request: CommandRequest, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        _validate_options(request)
        alg = load_spec(request.input)
        if request.subcommand == "validate":
            payload = {"valid": True, "name": alg.name, "n": alg.n, "r": alg.r, "Q": alg.Q}
            if request.output == OUTPUT_JSON:
                out.write(json.dumps(payload, indent=2) + "\n")
            else:
                out.write(f"OK: '{alg.name}' is a Carnot algebra (n={alg.n}, r={alg.r}, Q={alg.Q})\n")
            return EXIT_OK
        HANDLERS[request.subcommand](alg, request, out)
        return EXIT_OK
    except OSError as e:
        logger.error(f"Cannot read {request.input}: {e}")
        err.write(f"error: {e}\n")
        return EXIT_IO
    except ConvergenceError as e:
        logger.error(f"ConvergenceError: {e} (best value {e.best_value:.6g}, residual {e.residual:.3g})")
        err.write(f"error: ConvergenceError: {e}; best value {e.best_value:.6g}, residual {e.residual:.3g}\n")
        if request.output == OUTPUT_JSON:
            doc = {"error": "ConvergenceError", "message": str(e),
                   "best_value": e.best_value, "residual": e.residual}
            out.write(json.dumps(doc, indent=2, default=_json_default) + "\n")
        return EXIT_UNSUPPORTED
    except (CapacityError, StepUnsupported) as e:
        logger.error(f"{type(e).__name__}: {e}")
        err.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_UNSUPPORTED
    except ValidationError as e:
        logger.error(f"{e.kind}: {e}")
        err.write(json.dumps(e.to_dict()) + "\n")
        if request.output == OUTPUT_JSON:
            out.write(json.dumps({"valid": False, **e.to_dict()}, indent=2) + "\n")
        return EXIT_VALIDATION
    except (SpecError, ValueError, ZeroDivisionError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        err.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_VALIDATION


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    options = {k: v for k, v in vars(args).items() if k not in ("subcommand", "input", "output", "verbose")}
    if args.verbose:
        logging.getLogger("CARNOT").setLevel(logging.DEBUG)
    try:
        request = CommandRequest(subcommand=args.subcommand, input=args.input,
                                 output=args.output or OUTPUT_TABLE, options=options)
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    return run(request)


if __name__ == "__main__":
    sys.exit(main())
