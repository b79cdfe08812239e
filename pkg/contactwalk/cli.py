"""Subcommand orchestration: one Experiment subclass per subcommand."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .config_parser import RunConfig
from .contact import estimate_iota
from .enums import CheckStatus, Experiment as ExperimentKind
from .experiments import SweepSettings, coupling_experiment, sweep
from .invariants import InvariantSuite
from .regen import RegenSettings, confirm_sensitivity, estimate_gamma_event
from .report import generate_invariant_report, generate_summary_report, write_artifacts
from .stats import (
    batch_means_sigma,
    clt_diagnostic,
    estimate_regen,
    estimate_speed_lln,
    estimate_speed_subadditive,
    ldp_decay,
    subadditive_stationarity,
)

logger = logging.getLogger(__name__)

Records = List[Dict[str, Any]]


@dataclass
class RunOutcome:
    exit_code: int
    summary: Dict[str, Any]
    records: Records
    report: str
    written: List[Path] = field(default_factory=list)


class Experiment:
    kind: ExperimentKind

    def __init__(self, config: RunConfig):
        if not isinstance(config, RunConfig):
            raise ValueError("Experiment config must be a RunConfig.")
        self.config = config
        self.params = config.model_params()

    def __str__(self) -> str:
        return f"{type(self).__name__}({self.params})"

    def __repr__(self) -> str:
        return f"{type(self).__name__}(config={self.config!r})"

    def _common(self) -> Dict[str, Any]:
        run = self.config.run
        return {"seed": run.seed, "workers": run.workers, "max_events": run.max_events}

    def _iota_hat(self) -> float:
        if self.config.experiment.iota is not None:
            return self.config.experiment.iota
        exp = self.config.experiment
        estimate, _ = estimate_iota(
            self.params,
            exp.iota_replicas or self.config.run.replicas,
            exp.iota_horizon or self.config.window.horizon,
            **self._common(),
        )
        return estimate.iota

    def execute(self) -> Tuple[Dict[str, Any], Records]:
        raise NotImplementedError

    def exit_code(self, summary: Dict[str, Any]) -> int:
        return 0

    def report(self, summary: Dict[str, Any]) -> str:
        return generate_summary_report(self.kind.value, summary)


class SpeedExperiment(Experiment):
    kind = ExperimentKind.SPEED

    def execute(self):
        c = self.config
        estimate, records = estimate_speed_lln(
            self.params,
            c.initial,
            c.run.replicas,
            c.window.horizon,
            half_width=c.window.half_width,
            checkpoint=c.run.checkpoint,
            progress=c.run.progress,
            **self._common(),
        )
        return estimate.to_summary(), records


class SubadditiveExperiment(Experiment):
    kind = ExperimentKind.SUBADD

    def execute(self):
        c = self.config
        estimate, records = estimate_speed_subadditive(
            self.params, c.experiment.n_grid, c.run.replicas, progress=c.run.progress, **self._common()
        )
        summary = estimate.to_summary()
        grid = sorted(c.experiment.n_grid)
        k = grid[0]
        m = grid[1] - k if len(grid) > 1 else k
        check, _ = subadditive_stationarity(self.params, m, k, c.run.replicas, **self._common())
        summary["stationarity"] = check.to_summary()
        return summary, records


class RegenExperiment(Experiment):
    kind = ExperimentKind.REGEN

    def execute(self):
        c = self.config
        settings = RegenSettings(c.confirm_window, c.experiment.max_trials)
        speed, sigma, records = estimate_regen(
            self.params,
            c.run.replicas,
            settings,
            horizon=c.window.horizon,
            burn_in=c.initial.burn_in,
            iota_hat=c.experiment.iota,
            sequential=c.experiment.sequential,
            progress=c.run.progress,
            **self._common(),
        )
        gamma, _ = estimate_gamma_event(self.params, c.run.replicas, settings, burn_in=c.initial.burn_in,
                                        **self._common())
        doubled = confirm_sensitivity(
            self.params, c.run.replicas, [settings.confirm_window, 2.0 * settings.confirm_window],
            burn_in=c.initial.burn_in, **self._common(),
        )
        summary = speed.to_summary()
        summary["sigma"] = sigma.to_summary()
        summary["gamma_event"] = gamma.to_summary(self.params.lam)
        (w1, k1), (w2, k2) = doubled
        summary["confirm_sensitivity"] = {
            "windows": [w1, w2],
            "kappa_hat": [k1.estimate, k2.estimate],
            "shift_in_se": abs(k2.estimate - k1.estimate) / max(k1.se, 1e-12),
        }
        return summary, records


class IotaExperiment(Experiment):
    kind = ExperimentKind.IOTA

    def execute(self):
        c = self.config
        estimate, records = estimate_iota(
            self.params,
            c.experiment.iota_replicas or c.run.replicas,
            c.experiment.iota_horizon or c.window.horizon,
            progress=c.run.progress,
            **self._common(),
        )
        return estimate.to_summary(self.params.lam), records


class CouplingExperiment(Experiment):
    kind = ExperimentKind.COUPLE

    def execute(self):
        c = self.config
        report, records = coupling_experiment(
            self.params,
            c.initial,
            c.experiment.cone_m,
            c.experiment.t_grid,
            c.run.replicas,
            iota_hat=self._iota_hat(),
            progress=c.run.progress,
            **self._common(),
        )
        return report.to_summary(self.params.lam), records


class CltExperiment(Experiment):
    kind = ExperimentKind.CLT

    def execute(self):
        c = self.config
        settings = RegenSettings(c.confirm_window, c.experiment.max_trials)
        speed, sigma, _ = estimate_regen(
            self.params, c.run.replicas, settings, horizon=c.window.horizon, burn_in=c.initial.burn_in,
            iota_hat=c.experiment.iota, **self._common(),
        )
        batch = batch_means_sigma(
            self.params, c.experiment.clt_horizon, c.experiment.batches, c.run.replicas,
            initial=c.initial, half_width=c.window.half_width, **self._common(),
        )
        clt = clt_diagnostic(
            self.params, c.run.replicas, c.experiment.clt_horizon, speed.v_hat, sigma.sigma,
            initial=c.initial, half_width=c.window.half_width, **self._common(),
        )
        summary = clt.to_summary()
        summary["v_hat"] = speed.v_hat
        summary["sigma_regen"] = sigma.to_summary()
        summary["sigma_batch_means"] = batch.to_summary()
        summary["sigma_relative_gap"] = abs(sigma.sigma - batch.sigma) / batch.sigma if batch.sigma > 0 else None
        return summary, []


class LdpExperiment(Experiment):
    kind = ExperimentKind.LDP

    def execute(self):
        c = self.config
        speed, _ = estimate_speed_lln(
            self.params, c.initial, c.run.replicas, c.window.horizon, half_width=c.window.half_width,
            **self._common(),
        )
        report = ldp_decay(
            self.params, c.epsilon, c.experiment.ldp_t_grid, c.run.replicas, speed.v_hat,
            initial=c.initial, half_width=c.window.half_width, **self._common(),
        )
        summary = report.to_summary()
        summary["lambda"] = self.params.lam
        return summary, []


class SweepExperiment(Experiment):
    kind = ExperimentKind.SWEEP

    def execute(self):
        c = self.config
        settings = SweepSettings(
            horizon=c.window.horizon,
            replicas=c.run.replicas,
            seed=c.run.seed,
            initial=c.initial,
            iota_horizon=c.experiment.iota_horizon,
            iota_replicas=c.experiment.iota_replicas,
            bisect_iterations=c.experiment.bisect_iterations,
            workers=c.run.workers,
            max_events=c.run.max_events,
        )
        result = sweep(self.params, c.experiment.lambdas, settings)
        return result.to_summary(), []


class InvariantsExperiment(Experiment):
    kind = ExperimentKind.INVARIANTS

    def execute(self):
        suite = InvariantSuite(self.config.experiment.trials, self.config.run.seed)
        results = suite.run_all()
        self.results = results
        # durations vary between runs and stay out of the artifacts
        checks = [{k: v for k, v in r.items() if k != "duration_sec"} for r in results]
        summary = {
            "method": "invariants",
            "trials": self.config.experiment.trials,
            "passed": not suite.violated,
            "checks": checks,
        }
        return summary, checks

    def exit_code(self, summary):
        return 0 if summary["passed"] else 3

    def report(self, summary):
        return generate_invariant_report(getattr(self, "results", summary["checks"]))


_EXPERIMENTS = {cls.kind: cls for cls in (
    SpeedExperiment,
    SubadditiveExperiment,
    RegenExperiment,
    IotaExperiment,
    CouplingExperiment,
    CltExperiment,
    LdpExperiment,
    SweepExperiment,
    InvariantsExperiment,
)}


def create_experiment(subcommand: str, config: RunConfig) -> Experiment:
    kind = ExperimentKind.from_string(subcommand)
    return _EXPERIMENTS[kind](config)


def run(subcommand: str, config: RunConfig, out_dir: Optional[str] = None) -> RunOutcome:
    """Run one subcommand and write summary.json (plus replicas.csv) when an output directory is set."""
    experiment = create_experiment(subcommand, config)
    logger.info("Starting %s with %s", experiment.kind.value, experiment.params)
    summary, records = experiment.execute()
    summary.setdefault("experiment", experiment.kind.value)
    directory = out_dir or config.output.directory
    written = []
    if directory:
        written = write_artifacts(directory, summary, config.to_dict(), records, config.output.write_csv)
    code = experiment.exit_code(summary)
    if code:
        failed = [c["check"] for c in summary.get("checks", []) if c["status"] != CheckStatus.PASSED.value]
        logger.error("%s finished with violations: %s", experiment.kind.value, ", ".join(failed))
    logger.info("Finished %s", experiment.kind.value)
    return RunOutcome(code, summary, records, experiment.report(summary), written)
