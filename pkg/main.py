import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from contactwalk.cli import run
from contactwalk.config_parser import load_run_config
from contactwalk.enums import Experiment
from contactwalk.errors import ConfigParseError, ContactWalkError

logger = logging.getLogger("contactwalk")


def _float_list(text: str, flag: str, count: Optional[int] = None) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigParseError(f"{flag} expects comma-separated numbers, got '{text}'.")
    if count is not None and len(values) != count:
        raise ConfigParseError(f"{flag} expects {count} comma-separated numbers, got {len(values)}.")
    return values


def _initial_overrides(text: str) -> Dict[str, Any]:
    """'full', 'empty', 'bernoulli:P' or 'equilibrium[:BURN_IN]'."""
    mode, _, value = text.partition(":")
    overrides: Dict[str, Any] = {"initial.mode": mode}
    if value:
        key = "initial.p" if mode == "bernoulli" else "initial.burn_in"
        overrides[key] = _float_list(value, "--initial", 1)[0]
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contactwalk",
        description="Monte Carlo lab for a random walk on a supercritical one-dimensional contact process.",
    )
    parser.add_argument("subcommand", choices=[e.value for e in Experiment])
    parser.add_argument("--config", help="JSON run configuration; flags override its values")
    parser.add_argument("--lambda", dest="lam", type=float, help="infection rate")
    parser.add_argument("--gamma", type=float, help="total walk jump rate (default rate split 0.3/0.7)")
    parser.add_argument("--rates", help="alpha0,beta0,alpha1,beta1")
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--window", help="window half-width in sites, or 'auto'")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--initial", help="full | empty | bernoulli:P | equilibrium[:BURN_IN]")
    parser.add_argument("--confirm-window", type=float, help="failure confirmation window")
    parser.add_argument("--cone-m", type=float, help="cone slope for the coupling experiment")
    parser.add_argument("--epsilon", type=float, help="deviation for the LDP diagnostic")
    parser.add_argument("--iota", type=float, help="use this infection speed instead of estimating it")
    parser.add_argument("--trials", type=int, help="trials per invariant check")
    parser.add_argument("--lambdas", help="comma-separated lambda grid for sweep")
    parser.add_argument("--out", help="output directory for summary.json and replicas.csv")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--allow-zero-rates", action="store_true", default=None)
    parser.add_argument("--progress", action="store_true", default=None)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    simple = {
        "lam": "model.lambda",
        "gamma": "model.gamma",
        "allow_zero_rates": "model.allow_zero_rates",
        "horizon": "window.horizon",
        "replicas": "run.replicas",
        "seed": "run.seed",
        "workers": "run.workers",
        "progress": "run.progress",
        "confirm_window": "experiment.confirm_window",
        "cone_m": "experiment.cone_m",
        "epsilon": "experiment.epsilon",
        "iota": "experiment.iota",
        "trials": "experiment.trials",
        "out": "output.directory",
    }
    for attr, key in simple.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    if args.rates is not None:
        a0, b0, a1, b1 = _float_list(args.rates, "--rates", 4)
        overrides.update({"model.alpha0": a0, "model.beta0": b0, "model.alpha1": a1, "model.beta1": b1})
    if args.window is not None:
        if args.window == "auto":
            overrides["window.half_width"] = "auto"
        elif args.window.isdigit():
            overrides["window.half_width"] = int(args.window)
        else:
            raise ConfigParseError(f"--window expects a positive integer or 'auto', got '{args.window}'.")
    if args.initial is not None:
        overrides.update(_initial_overrides(args.initial))
    if args.lambdas is not None:
        overrides["experiment.lambdas"] = _float_list(args.lambdas, "--lambdas")
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_run_config(args.config, overrides_from_args(args))
        outcome = run(args.subcommand, config)
    except FileNotFoundError as e:
        logger.error("%s", e)
        return 1
    except ContactWalkError as e:
        logger.error("%s", e)
        return e.exit_code
    except ValueError as e:
        logger.error("Invalid parameters: %s", e)
        return 1
    except KeyboardInterrupt:
        logger.error("Run interrupted by user.")
        return 130

    print(outcome.report)
    for path in outcome.written:
        print(f"Wrote {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
