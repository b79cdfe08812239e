"""Regeneration machinery: wave hitting, failure and trial times, and the scan for tau.

A scan follows one realisation (log, trajectory, walk). Infinite-horizon
events are operationalised with a confirmation window: a failure search
that finds nothing within ``confirm_window`` counts as "never fails".
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from . import kernels
from .contact import ConfigTrajectory, InitialCondition, Configuration, evolve_trajectory
from .enums import FailureStatus, InitialMode
from .errors import InsufficientDataError
from .events import DEFAULT_MAX_EVENTS, EventLog, sample_event_log
from .intervals import Interval, proportion_interval
from .params import BOUNDARY_MARGIN, ModelParams, Window
from .rng import RngStreams
from .runner import parallel_replicas
from .walker import WalkPath, build_walk, sample_driver

logger = logging.getLogger(__name__)

DEFAULT_MAX_TRIALS = 10_000


def default_confirm_window(params: ModelParams) -> float:
    return 30.0 / min(1.0, params.gamma)


@dataclass(frozen=True)
class RegenSettings:
    confirm_window: float
    max_trials: int = DEFAULT_MAX_TRIALS

    def __post_init__(self):
        if self.confirm_window <= 0:
            raise ValueError(f"Confirmation window must be positive, got {self.confirm_window}.")
        if self.max_trials < 1:
            raise ValueError("At least one trial must be allowed.")

    @classmethod
    def for_params(cls, params: ModelParams, confirm_window: Optional[float] = None) -> "RegenSettings":
        return cls(confirm_window if confirm_window is not None else default_confirm_window(params))


@dataclass(frozen=True)
class HittingOutcome:
    """Wave hitting time V_t(z); ``time`` is inf when censored."""

    start: float
    z: int
    time: float
    censored: bool
    died: bool
    contaminated: bool


@dataclass(frozen=True)
class FailureOutcome:
    start: float
    time: float
    status: FailureStatus
    contaminated: bool

    @property
    def failed(self) -> bool:
        return self.status is FailureStatus.FAILED


@dataclass(frozen=True, eq=False)
class LeftTracerPath:
    """Y_{t,s}(x): moves from y to y - 1 at every arrow on the bond (y - 1, y)."""

    x: int
    t0: float
    horizon: float
    step_times: np.ndarray
    contaminated: bool

    def position_at(self, s: float) -> int:
        return self.x - int(np.searchsorted(self.step_times, s, side="right"))


@dataclass(frozen=True)
class TrialOutcome:
    start: float
    time: float
    failure: FailureOutcome
    tracer_site: Optional[int] = None
    hitting: Optional[HittingOutcome] = None

    @property
    def infinite(self) -> bool:
        return self.failure.status is FailureStatus.CONFIRMED

    @property
    def censored(self) -> bool:
        return not self.infinite and not math.isfinite(self.time)

    @property
    def contaminated(self) -> bool:
        return self.failure.contaminated or (self.hitting is not None and self.hitting.contaminated)


@dataclass
class RegenerationScan:
    trial_times: List[float] = field(default_factory=list)
    failures: List[FailureOutcome] = field(default_factory=list)
    K: Optional[int] = None
    tau: float = math.inf
    w_tau: Optional[int] = None
    complete: bool = False
    contaminated: bool = False
    reason: str = ""
    confirm_window: float = math.nan
    horizon: float = math.nan

    def to_rows(self, replica: int) -> List[dict]:
        flags = ",".join(f for f, on in (("contaminated", self.contaminated), ("incomplete", not self.complete)) if on)
        rows = []
        for k, trial in enumerate(self.trial_times, start=1):
            failure = self.failures[k - 1] if k - 1 < len(self.failures) else None
            rows.append(
                {
                    "replica": replica,
                    "k": k,
                    "trial_time": trial,
                    "failure_time": failure.time if failure is not None else math.nan,
                    "failure_status": failure.status.value if failure is not None else "",
                    "K": self.K,
                    "tau": self.tau,
                    "W_tau": self.w_tau,
                    "flags": flags or self.reason,
                }
            )
        return rows


def scans_to_dataframe(scans: List[Tuple[int, RegenerationScan]]) -> pd.DataFrame:
    return pd.DataFrame([row for replica, scan in scans for row in scan.to_rows(replica)])


def export_scans_csv(scans: List[Tuple[int, RegenerationScan]], path: Union[str, Path]):
    scans_to_dataframe(scans).to_csv(path, index=False)


def _walk_indices(path: WalkPath, x_min: int) -> np.ndarray:
    return path.positions - x_min


def _time_limit(log: EventLog, path: WalkPath) -> float:
    return min(log.window.horizon, path.valid_until)


def wave_hitting(log: EventLog, traj: ConfigTrajectory, path: WalkPath, t: float, z: int) -> HittingOutcome:
    """First s >= t with W_s equal to the right edge of the infection descending from sites below z."""
    w_t = path.position_at(t)
    if z > w_t + 1:
        raise ValueError(f"Wave start {z} must not lie right of the walker's neighbour {w_t + 1}.")
    window = log.window
    state = traj.state_at(t).restricted_below(z)
    merged = log.merged
    time, died, contaminated = kernels.wave_hit_scan(
        state.bits.copy(),
        merged.times,
        merged.kinds,
        merged.sites,
        merged.first_after(t),
        float(t),
        _time_limit(log, path),
        path.jump_times,
        _walk_indices(path, window.x_min),
        path.count_at(t),
        BOUNDARY_MARGIN,
    )
    censored = math.isnan(time) or bool(contaminated)
    return HittingOutcome(
        start=float(t),
        z=int(z),
        time=math.inf if censored else float(time),
        censored=censored,
        died=bool(died),
        contaminated=bool(contaminated),
    )


def failure_time(log: EventLog, path: WalkPath, t: float, confirm_window: float) -> FailureOutcome:
    """First s > t when the cluster of (W_t, t) is empty or no longer brackets the walk."""
    window = log.window
    x = path.position_at(t)
    limit = min(t + confirm_window, _time_limit(log, path))
    merged = log.merged
    time, min_lo, max_hi = kernels.failure_scan(
        window.n_sites,
        merged.times,
        merged.kinds,
        merged.sites,
        merged.first_after(t),
        window.index(x),
        limit,
        path.jump_times,
        _walk_indices(path, window.x_min),
        path.count_at(t),
    )
    contaminated = bool(min_lo <= BOUNDARY_MARGIN or max_hi >= window.n_sites - 1 - BOUNDARY_MARGIN)
    if not math.isnan(time):
        return FailureOutcome(float(t), float(time), FailureStatus.FAILED, contaminated)
    if t + confirm_window <= _time_limit(log, path):
        return FailureOutcome(float(t), math.inf, FailureStatus.CONFIRMED, contaminated)
    return FailureOutcome(float(t), math.inf, FailureStatus.UNCONFIRMED, contaminated)


def left_tracer(log: EventLog, x: int, t: float) -> LeftTracerPath:
    window = log.window
    window.index(x)
    steps = []
    y, now = x, float(t)
    contaminated = window.near_boundary(x)
    while y > window.x_min:
        arrows = log.arrows_on(y - 1)
        j = int(np.searchsorted(arrows, now, side="right"))
        if j == arrows.shape[0]:
            break
        now = float(arrows[j])
        y -= 1
        steps.append(now)
        if window.near_boundary(y):
            contaminated = True
    return LeftTracerPath(x, float(t), window.horizon, np.asarray(steps, dtype=np.float64), contaminated)


def trial_time(
    log: EventLog, traj: ConfigTrajectory, path: WalkPath, t: float, confirm_window: float
) -> TrialOutcome:
    """T_t = V_{F_t}(Y_{t,F_t}(W_t)), infinite when the failure search is confirmed empty."""
    failure = failure_time(log, path, t, confirm_window)
    if not failure.failed:
        return TrialOutcome(float(t), math.inf, failure)
    tracer = left_tracer(log, path.position_at(t), t)
    y = tracer.position_at(failure.time)
    hitting = wave_hitting(log, traj, path, failure.time, y)
    if tracer.contaminated:
        hitting = HittingOutcome(hitting.start, hitting.z, math.inf, True, hitting.died, True)
    return TrialOutcome(float(t), hitting.time, failure, y, hitting)


def _scan(
    log: EventLog, traj: ConfigTrajectory, path: WalkPath, t_start: float, settings: RegenSettings
) -> RegenerationScan:
    scan = RegenerationScan(
        confirm_window=settings.confirm_window, horizon=log.window.horizon, contaminated=path.contaminated
    )
    first = wave_hitting(log, traj, path, t_start, path.position_at(t_start))
    if first.censored:
        scan.contaminated |= first.contaminated
        scan.reason = "first wave never reached the walker"
        return scan
    scan.trial_times.append(first.time)
    for k in range(1, settings.max_trials + 1):
        trial = trial_time(log, traj, path, scan.trial_times[-1], settings.confirm_window)
        scan.failures.append(trial.failure)
        scan.contaminated |= trial.contaminated
        if trial.infinite:
            scan.K = k
            scan.tau = scan.trial_times[-1]
            scan.w_tau = path.position_at(scan.tau)
            scan.complete = True
            return scan
        if trial.failure.status is FailureStatus.UNCONFIRMED:
            scan.reason = "horizon reached before the confirmation window closed"
            return scan
        if trial.censored:
            scan.reason = "wave after a failure never reached the walker"
            return scan
        scan.trial_times.append(trial.time)
    scan.reason = f"no regeneration within {settings.max_trials} trials"
    return scan


def regeneration_scan(
    log: EventLog, traj: ConfigTrajectory, path: WalkPath, settings: RegenSettings
) -> RegenerationScan:
    """Trial times from the first wave hit V_0(0) up to tau, the first trial that never fails."""
    return _scan(log, traj, path, 0.0, settings)


def regeneration_cycles(
    log: EventLog, traj: ConfigTrajectory, path: WalkPath, settings: RegenSettings, max_cycles: int = 1000
) -> List[Tuple[float, int]]:
    """Successive (tau increment, W increment) pairs, restarting each scan at the previous tau."""
    cycles = []
    start, w_start = 0.0, path.position_at(0.0)
    for _ in range(max_cycles):
        scan = _scan(log, traj, path, start, settings)
        if not scan.complete or scan.contaminated:
            break
        cycles.append((scan.tau - start, scan.w_tau - w_start))
        start, w_start = scan.tau, scan.w_tau
    return cycles


@dataclass(frozen=True)
class GammaEstimate:
    """Estimates of kappa = P(no failure | single infection at 0), rho and P(Gamma)."""

    kappa: Interval
    rho: Interval
    p_gamma: Interval
    kappa_conditional: Optional[Interval]
    identity_z: float
    confirm_window: float
    replicas: int
    contaminated: int

    @property
    def identity_holds(self) -> bool:
        return abs(self.identity_z) <= 3.0

    def to_summary(self, lam: float) -> dict:
        return {
            "lambda": lam,
            "method": "gamma-event",
            "kappa_hat": self.kappa.estimate,
            "kappa_se": self.kappa.se,
            "rho_hat": self.rho.estimate,
            "rho_se": self.rho.se,
            "p_gamma_hat": self.p_gamma.estimate,
            "p_gamma_se": self.p_gamma.se,
            "identity_z": self.identity_z,
            "replicas": self.replicas,
            "censoring": {"confirm_window": self.confirm_window, "contaminated": self.contaminated},
            "flags": [] if self.identity_holds else ["gamma-identity-off"],
        }


def _gamma_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    confirm = payload["confirm_window"]
    streams = RngStreams(payload["seed"])
    window = Window.for_horizon(params, confirm)
    max_events = payload["max_events"]
    record = {"infected": False, "gamma": False, "single_confirmed": False, "contaminated": False}

    def no_failure(initial: Configuration, env_key: int) -> Tuple[bool, bool]:
        log = sample_event_log(params, window, streams.env(index).child(env_key), max_events)
        traj = evolve_trajectory(initial, log)
        path = build_walk(traj, params, sample_driver(params, confirm, streams.walk(index).child(env_key)))
        outcome = failure_time(log, path, 0.0, confirm)
        return outcome.status is FailureStatus.CONFIRMED, outcome.contaminated or path.contaminated

    equilibrium = InitialCondition(InitialMode.EQUILIBRIUM, burn_in=payload["burn_in"])
    initial = equilibrium.realise(params, window, streams.init(index), max_events)
    record["infected"] = bool(initial[0] == 1)
    if record["infected"]:
        confirmed, dirty = no_failure(initial, 0)
        record["gamma"] = bool(confirmed)
        record["contaminated"] = bool(dirty)
    confirmed, dirty = no_failure(Configuration.single(window, 0), 1)
    record["single_confirmed"] = bool(confirmed)
    record["contaminated"] = bool(record["contaminated"] or dirty)
    return record


def estimate_gamma_event(
    params: ModelParams,
    replicas: int,
    settings: RegenSettings,
    seed: int,
    burn_in: float = 40.0,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[GammaEstimate, List[dict]]:
    """kappa from single-infection starts, rho and P(Gamma) from equilibrium starts.

    The two samples use different event logs, so P(Gamma) = kappa * rho is a
    genuine check.
    """
    payload = {
        "params": params,
        "confirm_window": settings.confirm_window,
        "seed": seed,
        "burn_in": burn_in,
        "max_events": max_events,
    }
    records = parallel_replicas(_gamma_replica, payload, replicas, workers, progress=progress)
    clean = [r for r in records if not r["contaminated"]]
    contaminated = len(records) - len(clean)
    infected = sum(r["infected"] for r in clean)
    if not clean or infected == 0:
        raise InsufficientDataError(
            "Rejection sampling found no equilibrium start with the origin infected.",
            {"replicas": replicas, "usable": len(clean), "infected": infected},
        )
    n = len(clean)
    kappa = proportion_interval(sum(r["single_confirmed"] for r in clean), n)
    rho = proportion_interval(infected, n)
    p_gamma = proportion_interval(sum(r["gamma"] for r in clean), n)
    kappa_conditional = proportion_interval(sum(r["gamma"] for r in clean), infected)
    product_se = math.sqrt((rho.estimate * kappa.se) ** 2 + (kappa.estimate * rho.se) ** 2)
    spread = math.sqrt(p_gamma.se**2 + product_se**2)
    gap = p_gamma.estimate - kappa.estimate * rho.estimate
    identity_z = gap / spread if spread > 0 else (0.0 if gap == 0 else math.inf)
    estimate = GammaEstimate(
        kappa, rho, p_gamma, kappa_conditional, identity_z, settings.confirm_window, replicas, contaminated
    )
    logger.info(
        "kappa_hat=%.4f rho_hat=%.4f P(Gamma)=%.4f (identity z=%.2f)",
        kappa.estimate,
        rho.estimate,
        p_gamma.estimate,
        identity_z,
    )
    return estimate, records


def confirm_sensitivity(
    params: ModelParams,
    replicas: int,
    windows: List[float],
    seed: int,
    burn_in: float = 40.0,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> List[Tuple[float, Interval]]:
    """kappa_hat for each confirmation window."""
    rows = []
    for window in windows:
        estimate, _ = estimate_gamma_event(
            params, replicas, RegenSettings(window), seed, burn_in, workers, max_events
        )
        rows.append((float(window), estimate.kappa))
    return rows
