import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from . import config
from .comparators import FallbackSpec, bonferroni_bounds, compatible_sci, fallback_bounds, is_fallback_graph
from .design import calibrate_information_weight, power_design
from .errors import GraphError, ISCIError, ModelError, ScenarioError, SolverError
from .fileio import (curve_table, dump_json, encode_reals, load_estimates, load_graph, load_scenario,
                     scenario_table, write_csv)
from .graph import rescale_alpha, run_graphical_test, validate_graph
from .models import BoundsReport, CliConfig, CliError, InformationWeightSpec
from .pvalues import ShiftSpec, normal_models
from .simulation import run_scenario, trade_off_curve
from .solver import compute_bounds, induced_test

logger = logging.getLogger("ISCI.CLI")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

METHODS = ("isci", "bonferroni", "fallback", "csci")


class NonConvergence(Exception):
    def __init__(self, iterations: int, step_norm: float):
        super().__init__(f"no convergence after {iterations} iterations (last step {step_norm:.3g})")
        self.iterations = iterations
        self.step_norm = step_norm


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isci", description="Informative simultaneous confidence intervals for graphical tests")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="Check a graph file")
    p.add_argument("graph")

    for name, help_text in (("bounds", "Compute lower confidence bounds"), ("test", "Run the graphical test at the borders")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("graph")
        p.add_argument("estimates")
        p.add_argument("--alpha", type=float)
        p.add_argument("--out")
        if name == "bounds":
            p.add_argument("--method", choices=METHODS, default="isci")
            p.add_argument("--q", type=float)
            p.add_argument("--eps", type=float)
            p.add_argument("--max-iter", type=int)

    p = sub.add_parser("simulate", help="Run a Monte Carlo scenario")
    p.add_argument("scenario")
    p.add_argument("--out", default="results")
    p.add_argument("--curve", action="store_true", help="Sweep the scenario's q grid")
    p.add_argument("--alpha", type=float, help="Rescale the scenario graph to this overall level")
    p.add_argument("--q", type=float, help="Use this information weight for every hypothesis")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-sims", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("calibrate", help="Design arithmetic for the information weight")
    p.add_argument("--alpha-local", type=float, default=0.0125)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--delta", type=float, required=True, help="Distance from the border powered at 1 - beta")
    p.add_argument("--effect", type=float, required=True, help="Effect at which the level is recalibrated")
    p.add_argument("--out")
    return parser


def _config(args: argparse.Namespace) -> CliConfig:
    return CliConfig(
        subcommand=args.subcommand,
        inputs=[getattr(args, k) for k in ("graph", "estimates", "scenario") if getattr(args, k, None)],
        output=getattr(args, "out", None),
        method=getattr(args, "method", "isci"),
        alpha=getattr(args, "alpha", None),
        q=getattr(args, "q", None),
        eps=getattr(args, "eps", None),
        max_iter=getattr(args, "max_iter", None),
        seed=getattr(args, "seed", None),
        n_sims=getattr(args, "n_sims", None),
        threads=getattr(args, "threads", None)
    )


# --- Commands ---

def cmd_validate(cfg: CliConfig) -> int:
    report = validate_graph(load_graph(cfg.inputs[0]))
    print(dump_json(report.model_dump()))
    return EXIT_OK if report.valid else EXIT_INVALID


def _inputs(cfg: CliConfig):
    graph = load_graph(cfg.inputs[0])
    if cfg.alpha is not None:
        graph = rescale_alpha(graph, cfg.alpha)
    est = load_estimates(cfg.inputs[1])
    if len(est.estimates) != graph.size:
        raise ModelError(f"{len(est.estimates)} estimates for a graph with {graph.size} hypotheses")
    return graph, normal_models(est.estimates, est.se), est.shifts


def bounds_report(cfg: CliConfig) -> BoundsReport:
    graph, models, shifts = _inputs(cfg)
    if cfg.method in ("bonferroni", "csci") and cfg.q is not None:
        logger.warning(f"--q is ignored for method {cfg.method}")
    if cfg.method in ("isci", "fallback") and cfg.q is None:
        raise ModelError(f"method {cfg.method} needs an information weight (--q)")

    iterations, converged = 0, True
    if cfg.method == "isci":
        bounds, trace = compute_bounds(graph, models, InformationWeightSpec.of(cfg.q), eps=cfg.eps,
                                       max_iter=cfg.max_iter, shifts=shifts, record=False)
        if not trace.converged:
            raise NonConvergence(trace.iterations, trace.step_norm)
        iterations, converged = trace.iterations, trace.converged
    elif cfg.method == "bonferroni":
        bounds = bonferroni_bounds(models, graph.initial_levels, shifts=shifts)
    elif cfg.method == "fallback":
        if not is_fallback_graph(graph):
            raise GraphError("method fallback needs a fallback chain graph")
        bounds = fallback_bounds(FallbackSpec.from_graph(graph, cfg.q), models, eps=cfg.eps, shifts=shifts)
    else:
        bounds = compatible_sci(graph, models, shifts=shifts)

    return BoundsReport(method=cfg.method, L=bounds.lower, rejected=induced_test(bounds),
                        iterations=iterations, converged=converged)


def cmd_bounds(cfg: CliConfig) -> int:
    report = bounds_report(cfg)
    payload = report.model_dump()
    payload["L"] = encode_reals(report.L)
    print(dump_json(payload, cfg.output))
    return EXIT_OK


def cmd_test(cfg: CliConfig) -> int:
    graph, models, shifts = _inputs(cfg)
    tested = (ShiftSpec(offset=shifts) if shifts else ShiftSpec.none(graph.size)).apply(models)
    result = run_graphical_test(graph, [m.pvalue(0.0) for m in tested])
    print(dump_json(result.model_dump(), cfg.output))
    return EXIT_OK


def cmd_simulate(cfg: CliConfig, curve: bool) -> int:
    scenario = load_scenario(cfg.inputs[0])
    update = {}
    if cfg.seed is not None:
        update["seed"] = cfg.seed
    if cfg.n_sims is not None:
        update["n_sims"] = cfg.n_sims
    if cfg.alpha is not None:
        update["graph"] = rescale_alpha(scenario.graph, cfg.alpha)
    if cfg.q is not None:
        update["weights"] = InformationWeightSpec.of(cfg.q)
    if update:
        scenario = scenario.model_copy(update=update)
    threads = cfg.threads if cfg.threads is not None else config.THREADS

    out = Path(cfg.output or "results")
    if curve:
        if scenario.curve is None:
            raise ScenarioError(f"scenario {scenario.name} defines no curve")
        rows = trade_off_curve(scenario, threads=threads, eps=cfg.eps, max_iter=cfg.max_iter)
        path = out / f"{scenario.name}_curve.csv"
        write_csv(curve_table(rows), str(path))
    else:
        result = run_scenario(scenario, threads=threads, eps=cfg.eps, max_iter=cfg.max_iter)
        path = out / f"{scenario.name}.csv"
        write_csv(scenario_table(result), str(path))
    print(dump_json({"output": str(path)}))
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    design = power_design(args.alpha_local, args.beta, args.delta)
    target = design.alpha_for_effect(args.effect)
    payload = {
        "information": design.information,
        "alpha_effect": target,
        "q": calibrate_information_weight(target, args.delta, args.alpha_local)
    }
    print(dump_json(payload, args.out))
    return EXIT_OK


# --- Entry Point ---

def _fail(code: int, message: str, errors: Optional[List[dict]] = None) -> int:
    logger.error(message)
    print(CliError(code=code, message=message, errors=errors).model_dump_json(), file=sys.stderr)
    return code


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "calibrate":
            return cmd_calibrate(args)
        cfg = _config(args)
        if cfg.subcommand == "validate":
            return cmd_validate(cfg)
        if cfg.subcommand == "bounds":
            return cmd_bounds(cfg)
        if cfg.subcommand == "test":
            return cmd_test(cfg)
        return cmd_simulate(cfg, args.curve)
    except ValidationError as e:
        return _fail(EXIT_INPUT, "invalid input", [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()])
    except (OSError, json.JSONDecodeError) as e:
        return _fail(EXIT_INPUT, f"cannot read input: {e}")
    except NonConvergence as e:
        return _fail(EXIT_NUMERIC, str(e), [{"iterations": e.iterations, "step_norm": e.step_norm}])
    except SolverError as e:
        return _fail(EXIT_NUMERIC, str(e))
    except ISCIError as e:
        return _fail(EXIT_INPUT, str(e))


def main() -> None:
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
    sys.exit(run())


if __name__ == "__main__":
    main()
