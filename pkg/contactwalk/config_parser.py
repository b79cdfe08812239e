import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .contact import LAMBDA_C_REFERENCE, InitialCondition
from .enums import InitialMode
from .errors import ConfigParseError
from .events import DEFAULT_MAX_EVENTS
from .params import BOUNDARY_MARGIN, ModelParams, Window
from .regen import DEFAULT_MAX_TRIALS, default_confirm_window

# right-step fractions alpha_i / gamma used when only gamma is given
DEFAULT_RIGHT_FRACTIONS = (0.3, 0.7)


@dataclass(frozen=True)
class ModelSection:
    lam: float = 4.0
    alpha0: float = 0.3
    beta0: float = 0.7
    alpha1: float = 0.7
    beta1: float = 0.3
    allow_zero_rates: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "alpha0": self.alpha0,
            "beta0": self.beta0,
            "alpha1": self.alpha1,
            "beta1": self.beta1,
            "allow_zero_rates": self.allow_zero_rates,
        }


@dataclass(frozen=True)
class WindowSection:
    half_width: Optional[int] = None
    horizon: float = 100.0

    def to_dict(self) -> dict:
        return {"half_width": "auto" if self.half_width is None else self.half_width, "horizon": self.horizon}


@dataclass(frozen=True)
class RunSection:
    replicas: int = 200
    seed: int = 0
    workers: int = 1
    max_events: int = DEFAULT_MAX_EVENTS
    progress: bool = False
    checkpoint: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "replicas": self.replicas,
            "seed": self.seed,
            "workers": self.workers,
            "max_events": self.max_events,
            "progress": self.progress,
            "checkpoint": self.checkpoint,
        }


@dataclass(frozen=True)
class ExperimentSection:
    confirm_window: Optional[float] = None
    max_trials: int = DEFAULT_MAX_TRIALS
    sequential: bool = False
    cone_m: Optional[float] = None
    iota: Optional[float] = None
    epsilon: Optional[float] = None
    lambda_c_reference: float = LAMBDA_C_REFERENCE
    n_grid: List[int] = field(default_factory=lambda: [10, 20, 40, 80])
    t_grid: List[float] = field(default_factory=lambda: [10.0, 20.0, 40.0, 60.0])
    ldp_t_grid: List[float] = field(default_factory=lambda: [50.0, 100.0, 200.0])
    lambdas: List[float] = field(default_factory=lambda: [2.0, 2.5, 3.0, 4.0, 6.0])
    trials: int = 1000
    batches: int = 10
    clt_horizon: float = 200.0
    iota_horizon: Optional[float] = None
    iota_replicas: Optional[int] = None
    bisect_iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "confirm_window": self.confirm_window,
            "max_trials": self.max_trials,
            "sequential": self.sequential,
            "cone_m": self.cone_m,
            "iota": self.iota,
            "epsilon": self.epsilon,
            "lambda_c_reference": self.lambda_c_reference,
            "n_grid": list(self.n_grid),
            "t_grid": list(self.t_grid),
            "ldp_t_grid": list(self.ldp_t_grid),
            "lambdas": list(self.lambdas),
            "trials": self.trials,
            "batches": self.batches,
            "clt_horizon": self.clt_horizon,
            "iota_horizon": self.iota_horizon,
            "iota_replicas": self.iota_replicas,
            "bisect_iterations": self.bisect_iterations,
        }


@dataclass(frozen=True)
class OutputSection:
    directory: Optional[str] = None
    write_csv: bool = True

    def to_dict(self) -> dict:
        return {"directory": self.directory, "write_csv": self.write_csv}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    window: WindowSection = field(default_factory=WindowSection)
    run: RunSection = field(default_factory=RunSection)
    initial: InitialCondition = field(default_factory=InitialCondition)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    output: OutputSection = field(default_factory=OutputSection)

    def model_params(self) -> ModelParams:
        m = self.model
        return ModelParams(m.lam, m.alpha0, m.beta0, m.alpha1, m.beta1, m.allow_zero_rates)

    def resolve_window(self, horizon: Optional[float] = None) -> Window:
        horizon = self.window.horizon if horizon is None else horizon
        if self.window.half_width is None:
            return Window.for_horizon(self.model_params(), horizon)
        return Window.around_origin(self.window.half_width, horizon)

    @property
    def confirm_window(self) -> float:
        if self.experiment.confirm_window is not None:
            return self.experiment.confirm_window
        return default_confirm_window(self.model_params())

    @property
    def epsilon(self) -> float:
        if self.experiment.epsilon is not None:
            return self.experiment.epsilon
        params = self.model_params()
        return 0.1 * abs(params.v1 - params.v0)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "window": self.window.to_dict(),
            "run": self.run.to_dict(),
            "initial": self.initial.to_dict(),
            "experiment": self.experiment.to_dict(),
            "output": self.output.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        return _Validator(data).build()


_SECTIONS = ("model", "window", "run", "initial", "experiment", "output")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Validator:
    """Walks a nested config dict and records every problem before raising."""

    def __init__(self, data: Any):
        self.data = data
        self.errors: List[str] = []

    def _section(self, name: str) -> Dict[str, Any]:
        raw = self.data.get(name, {})
        if raw is None:
            return {}
        if not isinstance(raw, dict):
            self.errors.append(f"Section '{name}' must be an object.")
            return {}
        return raw

    def _unknown(self, name: str, section: Dict[str, Any], allowed: tuple):
        for key in sorted(set(section) - set(allowed)):
            self.errors.append(f"Unknown key '{key}' in section '{name}'.")

    def _number(self, where: str, value: Any, positive: bool = False, non_negative: bool = False,
                optional: bool = False) -> Optional[float]:
        if value is None and optional:
            return None
        if not _is_number(value) or not math.isfinite(value):
            self.errors.append(f"'{where}' must be a finite number, got {value!r}.")
            return None
        if positive and value <= 0:
            self.errors.append(f"'{where}' must be positive, got {value!r}.")
        if non_negative and value < 0:
            self.errors.append(f"'{where}' must be non-negative, got {value!r}.")
        return float(value)

    def _integer(self, where: str, value: Any, minimum: Optional[int] = None, optional: bool = False) -> Optional[int]:
        if value is None and optional:
            return None
        if not _is_int(value):
            self.errors.append(f"'{where}' must be an integer, got {value!r}.")
            return None
        if minimum is not None and value < minimum:
            self.errors.append(f"'{where}' must be at least {minimum}, got {value!r}.")
        return int(value)

    def _flag(self, where: str, value: Any) -> bool:
        if not isinstance(value, bool):
            self.errors.append(f"'{where}' must be true or false, got {value!r}.")
            return False
        return value

    def _grid(self, where: str, value: Any, integer: bool = False) -> List[Any]:
        if not isinstance(value, list) or not value:
            self.errors.append(f"'{where}' must be a non-empty list.")
            return []
        check = _is_int if integer else _is_number
        if not all(check(v) and v > 0 for v in value):
            kind = "integers" if integer else "numbers"
            self.errors.append(f"'{where}' must contain positive {kind}, got {value!r}.")
            return []
        return [int(v) if integer else float(v) for v in value]

    def _model(self) -> ModelSection:
        raw = self._section("model")
        self._unknown("model", raw, ("lambda", "gamma", "alpha0", "beta0", "alpha1", "beta1", "allow_zero_rates"))
        defaults = ModelSection()
        lam = self._number("model.lambda", raw.get("lambda", defaults.lam), non_negative=True)
        allow_zero = self._flag("model.allow_zero_rates", raw.get("allow_zero_rates", False))
        rate_keys = ("alpha0", "beta0", "alpha1", "beta1")
        given = [k for k in rate_keys if k in raw]
        gamma = None
        if "gamma" in raw:
            gamma = self._number("model.gamma", raw["gamma"], positive=True)
        if given and len(given) != len(rate_keys):
            missing = ", ".join(k for k in rate_keys if k not in raw)
            self.errors.append(f"Rates must be given together; missing {missing}.")
            return defaults
        if given:
            rates = [self._number(f"model.{k}", raw[k], non_negative=True) for k in rate_keys]
        elif gamma is not None:
            low, high = DEFAULT_RIGHT_FRACTIONS
            rates = [low * gamma, gamma - low * gamma, high * gamma, gamma - high * gamma]
        else:
            rates = [defaults.alpha0, defaults.beta0, defaults.alpha1, defaults.beta1]
        if lam is None or any(r is None for r in rates):
            return defaults
        try:
            params = ModelParams(lam, *rates, allow_zero_rates=allow_zero)
        except ValueError as e:
            self.errors.append(f"model: {e}")
            return defaults
        if gamma is not None and given and abs(params.gamma - gamma) > math.ulp(gamma):
            self.errors.append(f"'model.gamma' = {gamma!r} does not equal alpha0 + beta0 = {params.gamma!r}.")
        return ModelSection(lam, *rates, allow_zero_rates=allow_zero)

    def _window(self, model: ModelSection) -> WindowSection:
        raw = self._section("window")
        self._unknown("window", raw, ("half_width", "horizon"))
        horizon = self._number("window.horizon", raw.get("horizon", WindowSection.horizon), positive=True)
        half_width = raw.get("half_width", "auto")
        if half_width == "auto" or half_width is None:
            half_width = None
        else:
            half_width = self._integer("window.half_width", half_width, minimum=BOUNDARY_MARGIN + 1)
        if half_width is not None and horizon is not None and horizon > 0:
            params = ModelParams(model.lam, model.alpha0, model.beta0, model.alpha1, model.beta1, model.allow_zero_rates)
            if half_width < params.reach(horizon):
                self.errors.append(
                    f"'window.half_width' = {half_width} is below the light-cone reach "
                    f"{params.reach(horizon)} for horizon {horizon}."
                )
        return WindowSection(half_width, horizon if horizon is not None else WindowSection.horizon)

    def _run(self) -> RunSection:
        raw = self._section("run")
        self._unknown("run", raw, ("replicas", "seed", "workers", "max_events", "progress", "checkpoint"))
        d = RunSection()
        seed = self._integer("run.seed", raw.get("seed", d.seed), minimum=0)
        if seed is not None and seed >= 2**64:
            self.errors.append(f"'run.seed' must be below 2**64, got {seed}.")
        checkpoint = raw.get("checkpoint")
        if checkpoint is not None and not isinstance(checkpoint, str):
            self.errors.append("'run.checkpoint' must be a path string.")
        return RunSection(
            replicas=self._integer("run.replicas", raw.get("replicas", d.replicas), minimum=1) or d.replicas,
            seed=seed if seed is not None else d.seed,
            workers=self._integer("run.workers", raw.get("workers", d.workers), minimum=1) or d.workers,
            max_events=self._integer("run.max_events", raw.get("max_events", d.max_events), minimum=1) or d.max_events,
            progress=self._flag("run.progress", raw.get("progress", d.progress)),
            checkpoint=checkpoint if isinstance(checkpoint, str) else None,
        )

    def _initial(self) -> InitialCondition:
        raw = self._section("initial")
        self._unknown("initial", raw, ("mode", "p", "burn_in"))
        d = InitialCondition()
        mode = d.mode
        try:
            mode = InitialMode.from_string(raw.get("mode", d.mode.value))
        except (TypeError, ValueError) as e:
            self.errors.append(f"'initial.mode': {e}")
        p = self._number("initial.p", raw.get("p", d.p))
        if p is not None and not 0.0 <= p <= 1.0:
            self.errors.append(f"'initial.p' must lie in [0, 1], got {p}.")
            p = None
        burn_in = self._number("initial.burn_in", raw.get("burn_in", d.burn_in), non_negative=True)
        if burn_in is not None and burn_in < 0:
            burn_in = None
        return InitialCondition(mode, d.p if p is None else p, d.burn_in if burn_in is None else burn_in)

    def _experiment(self) -> ExperimentSection:
        raw = self._section("experiment")
        d = ExperimentSection()
        self._unknown("experiment", raw, tuple(d.to_dict()))
        get = lambda key: raw.get(key, getattr(d, key))  # noqa: E731
        iota_replicas = self._integer("experiment.iota_replicas", get("iota_replicas"), minimum=2, optional=True)
        return ExperimentSection(
            confirm_window=self._number("experiment.confirm_window", get("confirm_window"), positive=True, optional=True),
            max_trials=self._integer("experiment.max_trials", get("max_trials"), minimum=1) or d.max_trials,
            sequential=self._flag("experiment.sequential", get("sequential")),
            cone_m=self._number("experiment.cone_m", get("cone_m"), positive=True, optional=True),
            iota=self._number("experiment.iota", get("iota"), positive=True, optional=True),
            epsilon=self._number("experiment.epsilon", get("epsilon"), positive=True, optional=True),
            lambda_c_reference=self._number(
                "experiment.lambda_c_reference", get("lambda_c_reference"), positive=True
            ) or d.lambda_c_reference,
            n_grid=self._grid("experiment.n_grid", get("n_grid"), integer=True) or d.n_grid,
            t_grid=self._grid("experiment.t_grid", get("t_grid")) or d.t_grid,
            ldp_t_grid=self._grid("experiment.ldp_t_grid", get("ldp_t_grid")) or d.ldp_t_grid,
            lambdas=self._grid("experiment.lambdas", get("lambdas")) or d.lambdas,
            trials=self._integer("experiment.trials", get("trials"), minimum=1) or d.trials,
            batches=self._integer("experiment.batches", get("batches"), minimum=2) or d.batches,
            clt_horizon=self._number("experiment.clt_horizon", get("clt_horizon"), positive=True) or d.clt_horizon,
            iota_horizon=self._number("experiment.iota_horizon", get("iota_horizon"), positive=True, optional=True),
            iota_replicas=iota_replicas,
            bisect_iterations=self._integer(
                "experiment.bisect_iterations", get("bisect_iterations"), minimum=0
            ) or 0,
        )

    def _output(self) -> OutputSection:
        raw = self._section("output")
        self._unknown("output", raw, ("directory", "write_csv"))
        directory = raw.get("directory")
        if directory is not None and (not isinstance(directory, str) or not directory.strip()):
            self.errors.append("'output.directory' must be a non-empty path string.")
            directory = None
        return OutputSection(directory, self._flag("output.write_csv", raw.get("write_csv", True)))

    def build(self) -> RunConfig:
        if not isinstance(self.data, dict):
            raise ConfigParseError("Configuration must be a JSON object with sections " + ", ".join(_SECTIONS) + ".")
        for key in sorted(set(self.data) - set(_SECTIONS)):
            self.errors.append(f"Unknown section '{key}'.")
        model = self._model()
        config = RunConfig(
            model=model,
            window=self._window(model),
            run=self._run(),
            initial=self._initial(),
            experiment=self._experiment(),
            output=self._output(),
        )
        if self.errors:
            raise ConfigParseError(
                f"Invalid configuration ({len(self.errors)} problem(s)):\n  - " + "\n  - ".join(self.errors)
            )
        return config


def apply_overrides(config: Union[RunConfig, Dict[str, Any]], overrides: Dict[str, Any]) -> RunConfig:
    """Re-validate ``config`` with dotted-key overrides such as ``{"model.lambda": 2.0}``.

    Setting ``model.gamma`` without rates rescales the default rate split.
    Setting rates drops any ``model.gamma`` entry that came from the file.
    """
    data = copy.deepcopy(config.to_dict() if isinstance(config, RunConfig) else config)
    keys = set(overrides)
    model = data.setdefault("model", {})
    rate_keys = {"model.alpha0", "model.beta0", "model.alpha1", "model.beta1"}
    if "model.gamma" in keys and not keys & rate_keys:
        for k in ("alpha0", "beta0", "alpha1", "beta1"):
            model.pop(k, None)
    elif keys & rate_keys:
        model.pop("gamma", None)
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigParseError(f"Override '{dotted}' must have the form section.key.")
        target = data.setdefault(section, {})
        if not isinstance(target, dict):
            raise ConfigParseError(f"Section '{section}' must be an object.")
        target[key] = value
    return RunConfig.from_dict(data)


def parse_run_config_from_file(filepath: Union[str, Path]) -> RunConfig:
    path_obj = Path(filepath)
    if not path_obj.is_file():
        raise FileNotFoundError(f"Configuration file not found: {filepath}")

    try:
        with open(path_obj, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Invalid JSON in configuration file '{filepath}': {e}")
    except OSError as e:
        raise ConfigParseError(f"Could not read configuration file '{filepath}': {e}")

    try:
        return RunConfig.from_dict(data)
    except ConfigParseError as e:
        raise ConfigParseError(f"Error parsing '{filepath}': {e}")


def load_run_config(filepath: Optional[Union[str, Path]], overrides: Dict[str, Any]) -> RunConfig:
    """File values (or defaults when no file is given) with flag overrides applied on top."""
    base = parse_run_config_from_file(filepath) if filepath else RunConfig()
    return apply_overrides(base, overrides) if overrides else base
