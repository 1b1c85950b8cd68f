"""
Command line entry point for the CU robust toolkit.

Usage:
    python main.py reformulate fixtures/polyhedral_rhs.json
    python main.py worst-case fixtures/ellipsoidal_center.json
    python main.py solve-knapsack [config.json] [--set budget=25]
    python main.py run-knapsack [config.json] --seed 7 --out results/knapsack.csv
    python main.py solve-portfolio [config.json] --set point.omega=1.5
    python main.py run-portfolio [config.json] --format json
    python main.py verify --suite duality
    python main.py export fixtures/polyhedral_rhs.json --format lp

Exit codes: 0 success, 1 domain error, 2 usage error. Errors are written
as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import (
    BASE_SEED,
    FEASIBILITY_TOL,
    LOG_LEVEL,
    MAX_THREADS,
    VERBS,
    VERBS_REQUIRING_INPUT,
    VERIFY_SUITES,
    get_runtime_info,
    validate_thread_count,
)
from dro_counterpart import dro_report, first_stage_lp
from errors import CuError, MissingInput, ReformulationUnsupported, SchemaError, UnknownVerb, UsageError
from experiment_engine import ExperimentResult, print_summary
from instances import Instance, dump_instance, load_instance
from knapsack import run_knapsack_experiment, solve_knapsack_pair
from lp_core import write_lp_text
from portfolio import run_portfolio_experiment, solve_portfolio
from ro_counterpart import (
    center_cu_lhs,
    center_cu_system,
    matrix_cu_lhs,
    matrix_worst_case_oracle,
    nested_worst_case_oracle,
    polyhedral_cu_dual_system,
    polyhedral_dual_bound,
    polyhedral_worst_case,
    worst_case_lp,
)
from settings import apply_overrides, knapsack_config_from_dict, load_config_file, portfolio_config_from_dict
from verify import VerifySettings, print_report, report_to_json, run_verify
from wealth_simulator import simulate_wealth

logger = logging.getLogger(__name__)

ORACLE_SAMPLES = 100_000

FORMATS = {
    "run-knapsack": ("csv", "json"),
    "run-portfolio": ("csv", "json"),
    "export": ("lp", "json"),
}


@dataclass
class Command:
    """One validated CLI invocation."""
    verb: str
    input: Optional[str] = None
    out: Optional[str] = None
    seed: Optional[int] = None
    threads: int = MAX_THREADS
    fmt: Optional[str] = None
    suite: str = "all"
    overrides: List[str] = field(default_factory=list)
    verbose: bool = False

    @property
    def output_format(self) -> str:
        return self.fmt or FORMATS.get(self.verb, ("json",))[0]


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() owns the exit code."""

    def error(self, message: str):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="main.py",
        description="Connected-uncertainty robust and distributionally robust optimization",
    )
    parser.add_argument("verb", nargs="?", help=" | ".join(VERBS))
    parser.add_argument("input", nargs="?", help="instance or config file")
    parser.add_argument("--out", default=None, help="write output here instead of stdout")
    parser.add_argument("--seed", type=int, default=None, help=f"base seed (default {BASE_SEED} or the config's)")
    parser.add_argument("--threads", type=int, default=MAX_THREADS, help="worker cap; output does not depend on it")
    parser.add_argument("--format", dest="fmt", default=None, choices=("csv", "json", "lp"))
    parser.add_argument("--suite", default="all", choices=VERIFY_SUITES)
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, repeatable; last one wins")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return parser


def usage() -> str:
    return _build_parser().format_usage()


def parse_args(argv: List[str]) -> Command:
    """
    Validate argv into a Command.

    Raises:
        UsageError (no verb, bad flag), UnknownVerb, MissingInput, BadOverride
    """
    args = _build_parser().parse_args(argv)
    if args.verb is None:
        raise UsageError("no verb given", {"verbs": VERBS})
    if args.verb not in VERBS:
        raise UnknownVerb(f"unknown verb {args.verb!r}", {"verbs": VERBS})
    if args.input is None and args.verb in VERBS_REQUIRING_INPUT:
        raise MissingInput(f"{args.verb} needs an input file")
    if args.input is not None and not Path(args.input).exists():
        raise MissingInput(f"input {args.input} does not exist", {"path": args.input})
    if not validate_thread_count(args.threads):
        raise UsageError("--threads must be at least 1", {"threads": args.threads})
    if args.fmt is not None and args.fmt not in FORMATS.get(args.verb, ("json",)):
        raise UsageError(f"--format {args.fmt} is not available for {args.verb}")
    # syntax check only; values are applied against the loaded document
    apply_overrides({}, args.overrides)
    return Command(
        verb=args.verb,
        input=args.input,
        out=args.out,
        seed=args.seed,
        threads=args.threads,
        fmt=args.fmt,
        suite=args.suite,
        overrides=list(args.overrides),
        verbose=args.verbose,
    )


def _emit(text: str, cmd: Command) -> None:
    if cmd.out is None:
        sys.stdout.write(text)
        return
    path = Path(cmd.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)
    logger.info(f"[cli] wrote {path}")


def _json(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _config_doc(cmd: Command) -> Dict[str, Any]:
    doc = load_config_file(cmd.input) if cmd.input else {}
    return apply_overrides(doc, cmd.overrides)


def _with_seed(cfg, cmd: Command):
    return cfg if cmd.seed is None else replace(cfg, seed=cmd.seed)


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------

def _reformulate(cmd: Command) -> int:
    inst = load_instance(cmd.input)
    if inst.kind == "polyhedral_rhs":
        system = polyhedral_cu_dual_system(inst.require_decision(), inst.process, inst.require_budget())
    elif inst.kind == "ellipsoidal_center":
        system = center_cu_system(inst.process, inst.require_budget())
    else:
        raise ReformulationUnsupported(
            f"no explicit constraint system for {inst.kind}",
            {"supported": ["polyhedral_rhs", "ellipsoidal_center"]},
        )
    _emit(system.to_json(), cmd)
    return 0


def _budget_status(inst: Instance, value: float) -> Optional[bool]:
    if inst.budget is None:
        return None
    return bool(value <= inst.budget + FEASIBILITY_TOL)


def worst_case_report(inst: Instance, seed: int) -> Dict[str, Any]:
    """Counterpart value and its independent oracle for one instance."""
    x = inst.require_decision()
    proc = inst.process
    doc: Dict[str, Any] = {"kind": inst.kind, "periods": inst.periods, "dimension": inst.dimension}
    if inst.kind == "ellipsoidal_center":
        lhs, trace = center_cu_lhs(x, proc)
        mode = "exact1d" if proc.dim == 1 else "monte_carlo"
        oracle = nested_worst_case_oracle(x, proc, mode, samples=ORACLE_SAMPLES, seed=seed)
        doc.update({
            "counterpart": lhs,
            "oracle": {"mode": mode, "value": oracle},
            "gap": lhs - oracle,
            "recursion": trace.to_dict(),
            "feasible": _budget_status(inst, lhs),
        })
    elif inst.kind == "ellipsoidal_matrix":
        lhs, signs = matrix_cu_lhs(x, proc)
        oracle = matrix_worst_case_oracle(x, proc, ORACLE_SAMPLES, seed)
        doc.update({
            "counterpart": lhs,
            "maximizing_signs": signs.to_dict(),
            "oracle": {"mode": "monte_carlo", "value": oracle},
            "gap": lhs - oracle,
            "feasible": _budget_status(inst, lhs),
        })
    elif inst.kind == "polyhedral_rhs":
        primal, path = polyhedral_worst_case(x, proc)
        bound, duals = polyhedral_dual_bound(x, proc)
        doc.update({
            "counterpart": bound,
            "oracle": {"mode": "primal_lp", "value": primal},
            "gap": bound - primal,
            "worst_path": [[float(v) for v in d] for d in path],
            "duals": duals,
            "feasible": _budget_status(inst, bound),
        })
    else:
        doc.update(dro_report(x, proc, inst.costs).to_dict())
    return doc


def _worst_case(cmd: Command) -> int:
    inst = load_instance(cmd.input)
    seed = BASE_SEED if cmd.seed is None else cmd.seed
    _emit(_json(worst_case_report(inst, seed)), cmd)
    return 0


def _solve_knapsack(cmd: Command) -> int:
    cfg = _with_seed(knapsack_config_from_dict(_config_doc(cmd)), cmd)
    pair = solve_knapsack_pair(cfg, 0)
    doc = {
        "profile": cfg.name,
        "seed": cfg.seed,
        "lambda": cfg.default_lambda,
        "radius": cfg.sweep_radius,
        "budget": cfg.budget,
        **pair,
    }
    _emit(_json(doc), cmd)
    return 0


def _write_experiment(result: ExperimentResult, cmd: Command, metrics: List[str], keys: List[str]) -> None:
    text = result.to_csv_text() if cmd.output_format == "csv" else result.to_json_text()
    _emit(text, cmd)
    if cmd.out is not None:
        print_summary(result, metrics, keys)


def _run_knapsack(cmd: Command) -> int:
    cfg = _with_seed(knapsack_config_from_dict(_config_doc(cmd)), cmd)
    logger.info(f"[cli] run-knapsack profile {cfg.name} seed {cfg.seed}")
    result = run_knapsack_experiment(cfg, cmd.threads)
    _write_experiment(result, cmd, ["avg_objective", "avg_satisfaction"], ["sweep", "r", "lambda", "model"])
    return 0


def _solve_portfolio(cmd: Command) -> int:
    cfg = _with_seed(portfolio_config_from_dict(_config_doc(cmd)), cmd)
    solutions = solve_portfolio(cfg, cfg.omega, cfg.rho, threads=cmd.threads)
    doc: Dict[str, Any] = {"profile": cfg.name, "seed": cfg.seed, "omega": cfg.omega, "rho": cfg.rho}
    for name, sol in solutions.items():
        wealth = simulate_wealth(sol.x1, sol.x2, cfg, cfg.omega, cfg.rho, cfg.wealth_samples, cfg.seed)
        doc[name] = {**sol.to_dict(), "wealth": wealth.to_dict()}
    _emit(_json(doc), cmd)
    return 0


def _run_portfolio(cmd: Command) -> int:
    cfg = _with_seed(portfolio_config_from_dict(_config_doc(cmd)), cmd)
    logger.info(f"[cli] run-portfolio profile {cfg.name} seed {cfg.seed}")
    result = run_portfolio_experiment(cfg, cmd.threads)
    _write_experiment(result, cmd, ["objective", "wealth_std", "wealth_worst"], ["omega", "rho", "model"])
    return 0


def _verify(cmd: Command) -> int:
    doc = apply_overrides({"verify": {}}, cmd.overrides)
    extra = set(doc) - {"verify"}
    if extra:
        raise SchemaError(f"verify accepts only verify.* overrides, got {sorted(extra)}")
    settings = VerifySettings.from_dict(doc["verify"])
    seed = BASE_SEED if cmd.seed is None else cmd.seed
    report = run_verify(cmd.suite, seed, cmd.threads, settings)
    _emit(report_to_json(report), cmd)
    if cmd.out is not None:
        print_report(report)
    return 0 if report["passed"] else 1


def _export(cmd: Command) -> int:
    inst = load_instance(cmd.input)
    if cmd.output_format == "json":
        _emit(dump_instance(inst), cmd)
        return 0
    if inst.kind == "polyhedral_rhs":
        problem = worst_case_lp(inst.require_decision(), inst.process)
    elif inst.kind == "moment":
        problem = first_stage_lp(inst.require_decision(), inst.process, inst.costs)
    else:
        raise ReformulationUnsupported(f"{inst.kind} has no primal LP", {"supported": ["polyhedral_rhs", "moment"]})
    _emit(write_lp_text(problem), cmd)
    return 0


HANDLERS = {
    "reformulate": _reformulate,
    "worst-case": _worst_case,
    "solve-knapsack": _solve_knapsack,
    "run-knapsack": _run_knapsack,
    "solve-portfolio": _solve_portfolio,
    "run-portfolio": _run_portfolio,
    "verify": _verify,
    "export": _export,
}


def _report_error(doc: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(doc) + "\n")


def run(cmd: Command) -> int:
    """Execute a Command; returns the process exit code."""
    try:
        return HANDLERS[cmd.verb](cmd)
    except CuError as e:
        logger.debug(f"[cli] {cmd.verb} failed", exc_info=True)
        _report_error(e.to_dict())
        return e.exit_code
    except Exception as e:
        logger.debug(f"[cli] {cmd.verb} crashed", exc_info=True)
        _report_error({"error": "internal_error", "message": str(e) or type(e).__name__, "details": {}})
        return 1


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as e:
        sys.stderr.write(usage())
        _report_error(e.to_dict())
        return e.exit_code
    configure_logging(cmd.verbose)
    logger.debug(f"[cli] {get_runtime_info()}")
    return run(cmd)


if __name__ == "__main__":
    sys.exit(main())
