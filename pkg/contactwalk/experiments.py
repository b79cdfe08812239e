"""Cone coupling experiment and the lambda sweep."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .contact import (
    Configuration,
    IotaEstimate,
    InitialCondition,
    equilibrium_density,
    estimate_iota,
    wide_spread_markers,
)
from .enums import InitialMode
from .errors import InsufficientDataError
from .events import DEFAULT_MAX_EVENTS, sample_event_log
from .intervals import Interval, mean_interval
from .params import BOUNDARY_MARGIN, ModelParams, Window
from .rng import RngStreams
from .runner import parallel_replicas
from .stats import SpeedEstimate, estimate_speed_lln

logger = logging.getLogger(__name__)


def default_cone_slope(params: ModelParams, iota_hat: float) -> float:
    return (params.max_drift + iota_hat) / 2.0


def house_tips(markers: Sequence[int], iota: float) -> np.ndarray:
    """Tips ((Z_n + Z_{n+1}) / 2, (Z_{n+1} - Z_n + 2) / iota) of the gaps between consecutive markers."""
    z = np.asarray(markers, dtype=np.float64)
    if z.shape[0] < 2:
        return np.empty((0, 2))
    return np.column_stack([(z[:-1] + z[1:]) / 2.0, (z[1:] - z[:-1] + 2.0) / iota])


@dataclass(frozen=True)
class CouplingReport:
    slope: float
    iota_hat: float
    t_grid: List[float]
    t_max: float
    replicas: int
    disagreement: List[float]
    safe_violations: int
    marker_density: Optional[Interval]
    mean_marker_gap: float
    tips_in_cone: int
    tips_total: int
    initial: str = ""

    @property
    def non_increasing(self) -> bool:
        return all(b <= a for a, b in zip(self.disagreement, self.disagreement[1:]))

    def to_summary(self, lam: float) -> dict:
        return {
            "lambda": lam,
            "method": "cone-coupling",
            "initial": self.initial,
            "m": self.slope,
            "iota_hat": self.iota_hat,
            "T_grid": list(self.t_grid),
            "disagreement_fraction": list(self.disagreement),
            "non_increasing": self.non_increasing,
            "safe_region_violations": self.safe_violations,
            "marker_density": None if self.marker_density is None else self.marker_density.estimate,
            "marker_density_ci95": None if self.marker_density is None else list(self.marker_density.ci),
            "mean_marker_gap": self.mean_marker_gap,
            "house_tips": {"total": self.tips_total, "inside_cone": self.tips_in_cone},
            "replicas": self.replicas,
            "censoring": {"T_max": self.t_max},
            "flags": [] if self.safe_violations == 0 else ["safe-region-violated"],
        }


def _coupling_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    t_max = payload["t_max"]
    slope = payload["slope"]
    iota = payload["iota_hat"]
    streams = RngStreams(payload["seed"])
    window = Window.for_horizon(params, t_max)
    initial: InitialCondition = payload["initial"]
    lower = initial.realise(params, window, streams.init(index), payload["max_events"])
    log = sample_event_log(params, window, streams.env(index), payload["max_events"])
    reach = int(math.ceil(slope * t_max + iota * t_max / 2.0)) + 2
    reach = min(reach, window.half_width - BOUNDARY_MARGIN - 1)
    markers = wide_spread_markers(log, lower, iota, t_max, sites=(-reach, reach))
    merged = log.merged
    last_bad, violations, intervals = kernels.coupling_scan(
        lower.bits.copy(),
        Configuration.full(window).bits,
        merged.times,
        merged.kinds,
        merged.sites,
        t_max,
        window.index(0),
        slope,
        markers - window.x_min,
        iota,
    )
    tips = house_tips(markers, iota)
    inside = int(np.sum(np.abs(tips[:, 0]) <= slope * tips[:, 1])) if tips.shape[0] else 0
    return {
        "last_bad_time": float(last_bad),
        "safe_violations": int(violations),
        "disagreement_intervals": int(intervals),
        "markers": int(markers.shape[0]),
        "marker_sites_checked": int(2 * reach + 1),
        "mean_gap": float(np.diff(markers).mean()) if markers.shape[0] > 1 else None,
        "tips_total": int(tips.shape[0]),
        "tips_in_cone": inside,
    }


def coupling_experiment(
    params: ModelParams,
    initial: InitialCondition,
    slope: Optional[float],
    t_grid: Sequence[float],
    replicas: int,
    seed: int,
    iota_hat: float,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[CouplingReport, List[dict]]:
    """Evolve the process from ``initial`` and from all-ones on the same events.

    For each T the report gives the fraction of replicas that still
    disagree somewhere in the cone |x| <= m t after time T, and the number
    of disagreements found inside the safe region built from the markers
    (always zero for a correct evolution).
    """
    if initial.mode is InitialMode.EMPTY:
        raise ValueError("The coupled initial must be full, Bernoulli or equilibrium.")
    grid = sorted(float(t) for t in t_grid)
    if not grid or grid[0] < 0:
        raise ValueError("The T grid must contain non-negative times.")
    slope = slope if slope is not None else default_cone_slope(params, iota_hat)
    t_max = grid[-1]
    payload = {
        "params": params,
        "initial": initial,
        "t_max": t_max,
        "slope": float(slope),
        "iota_hat": float(iota_hat),
        "seed": seed,
        "max_events": max_events,
    }
    records = parallel_replicas(_coupling_replica, payload, replicas, workers, progress=progress)
    last_bad = np.array([r["last_bad_time"] for r in records])
    disagreement = [float(np.mean(last_bad > t)) for t in grid]
    marker_density = None
    if len(records) >= 2:
        marker_density = mean_interval([r["markers"] / r["marker_sites_checked"] for r in records])
    gaps = [r["mean_gap"] for r in records if r["mean_gap"] is not None]
    violations = sum(r["safe_violations"] for r in records)
    if violations:
        logger.error("%d disagreements found inside the safe region", violations)
    report = CouplingReport(
        slope=float(slope),
        iota_hat=float(iota_hat),
        t_grid=grid,
        t_max=t_max,
        replicas=len(records),
        disagreement=disagreement,
        safe_violations=violations,
        marker_density=marker_density,
        mean_marker_gap=float(np.mean(gaps)) if gaps else math.nan,
        tips_in_cone=sum(r["tips_in_cone"] for r in records),
        tips_total=sum(r["tips_total"] for r in records),
        initial=initial.mode.value,
    )
    return report, records


@dataclass(frozen=True)
class SweepSettings:
    horizon: float
    replicas: int
    seed: int
    initial: InitialCondition = field(default_factory=InitialCondition)
    iota_horizon: Optional[float] = None
    iota_replicas: Optional[int] = None
    density_replicas: int = 20
    bisect_iterations: int = 0
    workers: int = 1
    max_events: int = DEFAULT_MAX_EVENTS


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    speed: SpeedEstimate
    iota: Optional[IotaEstimate]
    rho: Interval
    inside_speed_window: bool


@dataclass(frozen=True)
class SweepResult:
    points: List[SweepPoint]
    v0: float
    v1: float
    monotone: bool
    sign_change: Optional[Tuple[float, float]]
    lambda_w: Optional[Tuple[float, float]]

    def to_summary(self) -> dict:
        return {
            "method": "sweep",
            "v0": self.v0,
            "v1": self.v1,
            "monotone": self.monotone,
            "lambda_star_bracket": None if self.sign_change is None else list(self.sign_change),
            "lambda_w_bracket": None if self.lambda_w is None else list(self.lambda_w),
            "points": [
                {
                    "lambda": p.lam,
                    "v_hat": p.speed.v_hat,
                    "se": p.speed.se,
                    "ci95": list(p.speed.ci95),
                    "rho_hat": p.rho.estimate,
                    "rho_se": p.rho.se,
                    "iota_hat": None if p.iota is None else p.iota.iota,
                    "iota_ci95": None if p.iota is None else list(p.iota.interval.ci),
                    "inside_speed_window": p.inside_speed_window,
                    "flags": list(p.speed.flags),
                }
                for p in self.points
            ],
        }


def _iota_or_none(params: ModelParams, settings: SweepSettings) -> Optional[IotaEstimate]:
    try:
        estimate, _ = estimate_iota(
            params,
            settings.iota_replicas or settings.replicas,
            settings.iota_horizon or settings.horizon,
            settings.seed,
            settings.workers,
            settings.max_events,
        )
        return estimate
    except InsufficientDataError as exc:
        logger.info("No infection speed at lambda=%g: %s", params.lam, exc)
        return None


def bisect_lambda_w(
    template: ModelParams, bracket: Tuple[float, float], settings: SweepSettings, iterations: int
) -> Tuple[float, float]:
    """Shrink a bracket around lambda_W where iota(lambda) = max|v_i|.

    A midpoint moves an end only when the CI of iota_hat clears max|v_i|;
    otherwise the bracket is returned as it stands.
    """
    lo, hi = bracket
    target = template.max_drift
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        estimate = _iota_or_none(template.with_lambda(mid), settings)
        if estimate is None or estimate.interval.upper < target:
            lo = mid
        elif estimate.interval.lower > target:
            hi = mid
        else:
            break
    return lo, hi


def sweep(template: ModelParams, lambdas: Sequence[float], settings: SweepSettings) -> SweepResult:
    grid = sorted(float(lam) for lam in lambdas)
    if not grid:
        raise ValueError("The lambda grid must not be empty.")
    low, high = sorted((template.v0, template.v1))
    points = []
    for lam in grid:
        params = template.with_lambda(lam)
        logger.info("Sweep point lambda=%g", lam)
        speed, _ = estimate_speed_lln(
            params, settings.initial, settings.replicas, settings.horizon, settings.seed,
            settings.workers, settings.max_events,
        )
        window = Window.for_horizon(params, settings.initial.burn_in or 1.0)
        rho = equilibrium_density(
            params, settings.density_replicas, window, settings.initial.burn_in, settings.seed,
            settings.workers, settings.max_events,
        )
        iota = _iota_or_none(params, settings)
        inside = low < speed.ci95[0] and speed.ci95[1] < high
        points.append(SweepPoint(lam, speed, iota, rho, inside))

    monotone = all(b.speed.ci95[1] >= a.speed.ci95[0] for a, b in zip(points, points[1:]))

    sign_change = None
    if low < 0 < high:
        for a, b in zip(points, points[1:]):
            if a.speed.v_hat < 0 <= b.speed.v_hat or a.speed.v_hat > 0 >= b.speed.v_hat:
                sign_change = (a.lam, b.lam)
                break

    lambda_w = None
    margins = [None if p.iota is None else p.iota.iota - template.max_drift for p in points]
    for (a, ga), (b, gb) in zip(zip(points, margins), zip(points[1:], margins[1:])):
        if (ga is None or ga <= 0) and gb is not None and gb > 0:
            lambda_w = (a.lam, b.lam)
            break
    if lambda_w is not None and settings.bisect_iterations > 0:
        lambda_w = bisect_lambda_w(template, lambda_w, settings, settings.bisect_iterations)

    return SweepResult(points, template.v0, template.v1, monotone, sign_change, lambda_w)
