"""Estimators for the walk's speed and volatility, and the CLT / LDP diagnostics."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .contact import Configuration, InitialCondition, evolve_trajectory
from .enums import EstimatorMethod, FailureStatus, InitialMode
from .errors import InsufficientDataError
from .events import DEFAULT_MAX_EVENTS, sample_event_log
from .intervals import Interval, mean_interval, ratio_interval
from .params import ModelParams, Window
from .regen import RegenSettings, failure_time, regeneration_cycles, regeneration_scan
from .rng import RngStreams
from .runner import parallel_replicas
from .walker import build_walk, decompose, sample_driver

logger = logging.getLogger(__name__)

MIN_CONFIRMED_SCANS = 10
MIN_LDP_EXCEEDANCES = 5


@dataclass(frozen=True)
class SpeedEstimate:
    interval: Interval
    method: EstimatorMethod
    lam: float
    replicas: int
    censoring: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def v_hat(self) -> float:
        return self.interval.estimate

    @property
    def se(self) -> float:
        return self.interval.se

    @property
    def ci95(self) -> Tuple[float, float]:
        return self.interval.ci

    def to_summary(self) -> dict:
        return {
            "lambda": self.lam,
            "method": self.method.value,
            "v_hat": self.v_hat,
            "se": self.se,
            "ci95": list(self.ci95),
            "replicas": self.replicas,
            "censoring": dict(self.censoring),
            "flags": list(self.flags),
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class SigmaEstimate:
    """sigma_hat with its interval; the variance interval is carried alongside."""

    sigma: float
    lower: float
    upper: float
    variance: Interval
    method: EstimatorMethod
    details: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_variance(cls, variance: Interval, method: EstimatorMethod, **details) -> "SigmaEstimate":
        return cls(
            sigma=math.sqrt(max(variance.estimate, 0.0)),
            lower=math.sqrt(max(variance.lower, 0.0)),
            upper=math.sqrt(max(variance.upper, 0.0)),
            variance=variance,
            method=method,
            details=dict(details),
        )

    @property
    def ci95(self) -> Tuple[float, float]:
        return (self.lower, self.upper)

    def to_summary(self) -> dict:
        return {
            "method": self.method.value,
            "sigma_hat": self.sigma,
            "ci95": [self.lower, self.upper],
            "variance_hat": self.variance.estimate,
            "variance_se": self.variance.se,
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class SubadditiveTriple:
    x0n: int
    x0m: int
    xmn: int
    contaminated: bool

    @property
    def holds(self) -> bool:
        return self.x0n <= self.x0m + self.xmn


@dataclass(frozen=True)
class CltReport:
    ks_statistic: float
    p_value: float
    increment_correlation: float
    correlation_threshold: float
    replicas: int
    horizon: float

    @property
    def passes(self) -> bool:
        return self.p_value > 0.01 and abs(self.increment_correlation) < self.correlation_threshold

    def to_summary(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "increment_correlation": self.increment_correlation,
            "correlation_threshold": self.correlation_threshold,
            "replicas": self.replicas,
            "T": self.horizon,
            "passes": self.passes,
        }


@dataclass(frozen=True)
class LdpRow:
    t: float
    exceedances: int
    replicas: int
    rate: float
    upper_bound: bool
    exact_rate: Optional[float] = None
    cramer_rate: Optional[float] = None


@dataclass(frozen=True)
class LdpReport:
    epsilon: float
    v_hat: float
    rows: List[LdpRow]

    @property
    def negative(self) -> bool:
        return all(r.rate < 0 for r in self.rows)

    @property
    def non_exploding(self) -> bool:
        estimated = [abs(r.rate) for r in self.rows if not r.upper_bound]
        if not all(math.isfinite(r.rate) for r in self.rows):
            return False
        return not estimated or max(estimated) <= 10.0 * min(estimated)

    @property
    def upper_bounds_only(self) -> bool:
        return all(r.upper_bound for r in self.rows)

    def to_summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "v_hat": self.v_hat,
            "negative": self.negative,
            "non_exploding": self.non_exploding,
            "rows": [asdict(r) for r in self.rows],
        }


def _speed_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    horizon = payload["horizon"]
    streams = RngStreams(payload["seed"])
    window = Window.for_horizon(params, horizon, payload.get("half_width"))
    initial: InitialCondition = payload["initial"]
    eta = initial.realise(params, window, streams.init(index), payload["max_events"])
    log = sample_event_log(params, window, streams.env(index), payload["max_events"])
    traj = evolve_trajectory(eta, log)
    path = build_walk(traj, params, sample_driver(params, horizon, streams.walk(index)))
    dec = decompose(path)
    contaminated = path.contaminated or path.truncated
    times = payload.get("times", [horizon])
    return {
        "contaminated": bool(contaminated),
        "positions": None if contaminated else [int(p) for p in path.positions_at(times)],
        "rho_eff": dec.rho_eff,
        "healthy_fraction": dec.healthy_fraction,
        "jumps": int(path.jumps),
    }


def _walk_records(params, initial, horizon, replicas, seed, workers, max_events, times=None, progress=False,
                  half_width=None, checkpoint=None):
    payload = {
        "half_width": half_width,
        "params": params,
        "initial": initial,
        "horizon": float(horizon),
        "seed": seed,
        "max_events": max_events,
        "times": [float(t) for t in (times if times is not None else [horizon])],
    }
    return parallel_replicas(_speed_replica, payload, replicas, workers, checkpoint=checkpoint, progress=progress)


def _clean(records: List[dict], what: str) -> List[dict]:
    clean = [r for r in records if not r["contaminated"]]
    if len(clean) < 2:
        raise InsufficientDataError(
            f"Too few uncontaminated replicas to estimate {what}.",
            {"replicas": len(records), "usable": len(clean)},
        )
    return clean


def estimate_speed_lln(
    params: ModelParams,
    initial: InitialCondition,
    replicas: int,
    horizon: float,
    seed: int,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    half_width: Optional[int] = None,
    checkpoint: Optional[str] = None,
    progress: bool = False,
) -> Tuple[SpeedEstimate, List[dict]]:
    """Mean of W_h / h over uncontaminated replicas."""
    records = _walk_records(params, initial, horizon, replicas, seed, workers, max_events, progress=progress,
                            half_width=half_width, checkpoint=checkpoint)
    clean = _clean(records, "the speed")
    interval = mean_interval([r["positions"][-1] / horizon for r in clean])
    rho = mean_interval([r["rho_eff"] for r in clean])
    identity = params.v0 + (params.v1 - params.v0) * rho.estimate
    identity_se = abs(params.v1 - params.v0) * rho.se
    flags = []
    if abs(identity - interval.estimate) > 3.0 * math.hypot(identity_se, interval.se):
        flags.append("rho-eff-identity-off")
    low, high = sorted((params.v0, params.v1))
    if interval.estimate < low - 3 * interval.se or interval.estimate > high + 3 * interval.se:
        flags.append("outside-speed-window")
    estimate = SpeedEstimate(
        interval=interval,
        method=EstimatorMethod.LLN,
        lam=params.lam,
        replicas=len(clean),
        censoring={"horizon": float(horizon), "contaminated": len(records) - len(clean)},
        flags=flags,
        details={
            "initial": initial.mode.value,
            "rho_eff": rho.estimate,
            "rho_eff_se": rho.se,
            "speed_from_rho_eff": identity,
        },
    )
    logger.info("LLN speed at lambda=%g: %.4f +- %.4f (%d replicas)", params.lam, interval.estimate, interval.se, len(clean))
    return estimate, records


def subadditive_triple(params: ModelParams, m: int, n: int, seed: int, replica: int = 0,
                       max_events: int = DEFAULT_MAX_EVENTS) -> SubadditiveTriple:
    """(X_{0,n}, X_{0,m}, X_{m,n}) on one realisation.

    X_{m,n} restarts the environment from all-ones at time m, reusing the
    same events after m, and the walk from W_m with the same clock and
    uniforms after m.
    """
    if not 0 <= m <= n:
        raise ValueError(f"Need 0 <= m <= n, got m={m}, n={n}.")
    if n <= 0:
        raise ValueError("n must be positive.")
    streams = RngStreams(seed)
    window = Window.for_horizon(params, n)
    log = sample_event_log(params, window, streams.env(replica), max_events)
    driver = sample_driver(params, n, streams.walk(replica))
    full = Configuration.full(window)
    path = build_walk(evolve_trajectory(full, log), params, driver)
    contaminated = path.contaminated or path.truncated
    if contaminated:
        return SubadditiveTriple(0, 0, 0, True)
    w_m = path.position_at(m)
    restarted = build_walk(evolve_trajectory(full, log, t0=float(m)), params, driver, start=w_m)
    contaminated = restarted.contaminated or restarted.truncated
    return SubadditiveTriple(
        x0n=path.position_at(n),
        x0m=w_m,
        xmn=0 if contaminated else restarted.position_at(n) - w_m,
        contaminated=bool(contaminated),
    )


def estimate_speed_subadditive(
    params: ModelParams,
    n_grid: Sequence[int],
    replicas: int,
    seed: int,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[SpeedEstimate, List[dict]]:
    """E[W_n / n] from all-ones on a grid of n; the largest n gives v_hat."""
    grid = sorted(int(n) for n in n_grid)
    if not grid or grid[0] <= 0:
        raise ValueError("The n grid must contain positive integers.")
    initial = InitialCondition(InitialMode.FULL)
    records = _walk_records(params, initial, grid[-1], replicas, seed, workers, max_events, times=grid, progress=progress)
    clean = _clean(records, "the subadditive speed")
    positions = np.array([r["positions"] for r in clean], dtype=np.float64)
    intervals = [mean_interval(positions[:, j] / n) for j, n in enumerate(grid)]
    flags = []
    for (n_a, a), (n_b, b) in zip(zip(grid, intervals), zip(grid[1:], intervals[1:])):
        if b.estimate > a.estimate + 3.0 * math.hypot(a.se, b.se):
            logger.warning("E[W_n/n] rises from n=%d to n=%d beyond 3 SE (finite-size effect)", n_a, n_b)
            flags.append("non-monotone-grid")
            break
    estimate = SpeedEstimate(
        interval=intervals[-1],
        method=EstimatorMethod.SUBADDITIVE,
        lam=params.lam,
        replicas=len(clean),
        censoring={"horizon": float(grid[-1]), "contaminated": len(records) - len(clean)},
        flags=flags,
        details={"grid": [{"n": n, "mean": i.estimate, "se": i.se} for n, i in zip(grid, intervals)]},
    )
    return estimate, records


@dataclass(frozen=True)
class StationarityCheck:
    m: int
    k: int
    statistic: float
    pvalue: float
    samples: int

    def to_summary(self) -> dict:
        return asdict(self)


def _shifted_pair_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    m, k = payload["m"], payload["k"]
    shifted = subadditive_triple(params, m, m + k, payload["seed"], index, payload["max_events"])
    base = subadditive_triple(params, 0, k, payload["seed"], payload["offset"] + index, payload["max_events"])
    return {
        "contaminated": bool(shifted.contaminated or base.contaminated),
        "x_shifted": int(shifted.xmn),
        "x_base": int(base.x0n),
    }


def subadditive_stationarity(
    params: ModelParams,
    m: int,
    k: int,
    replicas: int,
    seed: int,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[StationarityCheck, List[dict]]:
    """Two-sample KS test of X_{m,m+k} against X_{0,k}, drawn from disjoint replica streams."""
    if m < 0 or k <= 0:
        raise ValueError(f"Need m >= 0 and k > 0, got m={m}, k={k}.")
    payload = {"params": params, "m": int(m), "k": int(k), "seed": seed, "max_events": max_events,
               "offset": replicas}
    records = parallel_replicas(_shifted_pair_replica, payload, replicas, workers, progress=progress)
    clean = _clean(records, "the shifted increment law")
    ks = stats.ks_2samp([r["x_shifted"] for r in clean], [r["x_base"] for r in clean])
    check = StationarityCheck(int(m), int(k), float(ks.statistic), float(ks.pvalue), len(clean))
    logger.info("X_{%d,%d} vs X_{0,%d}: KS p=%.3f over %d pairs", m, m + k, k, check.pvalue, len(clean))
    return check, records


def _regen_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    settings: RegenSettings = payload["settings"]
    horizon = payload["horizon"]
    streams = RngStreams(payload["seed"])
    window = Window.for_horizon(params, horizon)
    equilibrium = InitialCondition(InitialMode.EQUILIBRIUM, burn_in=payload["burn_in"])
    record = {"attempts": 0, "accepted": False, "complete": False, "contaminated": False,
              "K": None, "tau": None, "w_tau": None, "trials": 0, "cycles": []}
    for attempt in range(payload["max_attempts"]):
        record["attempts"] = attempt + 1
        eta = equilibrium.realise(params, window, streams.init(index).child(attempt), payload["max_events"])
        if eta[0] != 1:
            continue
        log = sample_event_log(params, window, streams.env(index).child(attempt), payload["max_events"])
        traj = evolve_trajectory(eta, log)
        path = build_walk(traj, params, sample_driver(params, horizon, streams.walk(index).child(attempt)))
        start = failure_time(log, path, 0.0, settings.confirm_window)
        if start.status is not FailureStatus.CONFIRMED or start.contaminated:
            continue
        record["accepted"] = True
        scan = regeneration_scan(log, traj, path, settings)
        record["complete"] = bool(scan.complete)
        record["contaminated"] = bool(scan.contaminated)
        record["trials"] = len(scan.trial_times)
        if scan.complete:
            record["K"] = int(scan.K)
            record["tau"] = float(scan.tau)
            record["w_tau"] = int(scan.w_tau)
        if payload["sequential"] and scan.complete and not scan.contaminated:
            record["cycles"] = [[float(dt), int(dw)] for dt, dw in regeneration_cycles(log, traj, path, settings)]
        break
    return record


def _regen_ratios(w: np.ndarray, tau: np.ndarray) -> Tuple[Interval, Interval, float]:
    """Speed and centred variance ratios, plus (E[W^2] - E[W]^2) / E[tau]."""
    speed = ratio_interval(w, tau)
    variance = ratio_interval((w - speed.estimate * tau) ** 2, tau)
    moment_form = float(np.var(w) / np.mean(tau))
    return speed, variance, moment_form


def geometric_fit(values: Sequence[int], kappa: float) -> Tuple[float, float]:
    """Chi-square statistic and p-value of values against Geometric(kappa) on {1, 2, ...}."""
    k = np.asarray(values, dtype=np.int64)
    n = k.shape[0]
    if n == 0 or not 0 < kappa <= 1:
        return math.nan, math.nan
    if kappa == 1:
        return (0.0, 1.0) if np.all(k == 1) else (math.inf, 0.0)
    # bins 1..top each expecting at least 5, the rest pooled into one tail bin
    top = 1
    while n * kappa * (1 - kappa) ** top >= 5.0:
        top += 1
    expected = np.array([n * kappa * (1 - kappa) ** (j - 1) for j in range(1, top + 1)] + [n * (1 - kappa) ** top])
    observed = np.array([np.sum(k == j) for j in range(1, top + 1)] + [np.sum(k > top)], dtype=np.float64)
    if expected.shape[0] < 2:
        return math.nan, math.nan
    # kappa is fitted from the same data: one degree of freedom less
    statistic, p_value = stats.chisquare(observed, expected, ddof=1)
    return float(statistic), float(p_value)


def exponential_tail_fit(samples: Sequence[float]) -> Tuple[float, float]:
    """Slope and R^2 of the empirical log-survival function against the sample value."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.shape[0]
    if n < 3:
        return math.nan, math.nan
    survival = 1.0 - np.arange(1, n + 1) / n
    keep = survival > 0
    fit = stats.linregress(x[keep], np.log(survival[keep]))
    return float(fit.slope), float(fit.rvalue**2)


def halves_ks_pvalue(samples: Sequence[float]) -> float:
    """Two-sample KS p-value of the first half of ``samples`` against the second."""
    x = np.asarray(samples, dtype=np.float64)
    half = x.shape[0] // 2
    if half < 2:
        return math.nan
    return float(stats.ks_2samp(x[:half], x[half:]).pvalue)


def estimate_regen(
    params: ModelParams,
    replicas: int,
    settings: RegenSettings,
    seed: int,
    horizon: float = 100.0,
    burn_in: float = 40.0,
    workers: int = 1,
    iota_hat: Optional[float] = None,
    sequential: bool = False,
    max_attempts: int = 50,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[SpeedEstimate, SigmaEstimate, List[dict]]:
    """v = E[W_tau | Gamma] / E[tau | Gamma] and sigma^2 = E[(W_tau - v tau)^2 | Gamma] / E[tau | Gamma]."""
    payload = {
        "params": params,
        "settings": settings,
        "horizon": float(horizon),
        "seed": seed,
        "burn_in": burn_in,
        "sequential": sequential,
        "max_attempts": max_attempts,
        "max_events": max_events,
    }
    records = parallel_replicas(_regen_replica, payload, replicas, workers, progress=progress)
    accepted = [r for r in records if r["accepted"]]
    usable = [r for r in accepted if r["complete"] and not r["contaminated"]]
    counts = {
        "replicas": replicas,
        "accepted": len(accepted),
        "complete": sum(1 for r in accepted if r["complete"]),
        "contaminated": sum(1 for r in accepted if r["contaminated"]),
    }
    if len(usable) < MIN_CONFIRMED_SCANS:
        raise InsufficientDataError("Too few confirmed regeneration scans.", counts)

    tau = np.array([r["tau"] for r in usable], dtype=np.float64)
    w = np.array([r["w_tau"] for r in usable], dtype=np.float64)
    K = [r["K"] for r in usable]
    speed, variance, moment_form = _regen_ratios(w, tau)

    flags = []
    if iota_hat is not None and iota_hat <= params.max_drift:
        logger.warning(
            "lambda=%g looks below lambda_W (iota_hat=%.3f <= max|v_i|=%.3f); regeneration results are out of theory",
            params.lam, iota_hat, params.max_drift,
        )
        flags.append("out-of-theory")

    kappa_hat = 1.0 / float(np.mean(K))
    chi2, chi2_p = geometric_fit(K, kappa_hat)
    tail_slope, tail_r2 = exponential_tail_fit(tau)
    details = {
        "kappa_from_K": kappa_hat,
        "K_chi2": chi2,
        "K_chi2_p": chi2_p,
        "tau_mean": float(tau.mean()),
        "tau_tail_slope": tail_slope,
        "tau_tail_r2": tail_r2,
        "tau_halves_ks_p": halves_ks_pvalue(tau),
        "w_tau_halves_ks_p": halves_ks_pvalue(w),
        "acceptance_rate": len(accepted) / max(1, sum(r["attempts"] for r in records)),
    }
    if sequential:
        pooled = [c for r in usable for c in r["cycles"]]
        if len(pooled) >= MIN_CONFIRMED_SCANS:
            c = np.array(pooled, dtype=np.float64)
            seq_speed, seq_var, _ = _regen_ratios(c[:, 1], c[:, 0])
            details["sequential"] = {
                "cycles": len(pooled),
                "v_hat": seq_speed.estimate,
                "v_se": seq_speed.se,
                "sigma_hat": math.sqrt(max(seq_var.estimate, 0.0)),
            }

    censoring = {
        "confirm_window": settings.confirm_window,
        "horizon": float(horizon),
        "incomplete": counts["accepted"] - counts["complete"],
        "contaminated": counts["contaminated"],
    }
    speed_estimate = SpeedEstimate(speed, EstimatorMethod.REGENERATION, params.lam, len(usable), censoring, flags, details)
    sigma_estimate = SigmaEstimate.from_variance(
        variance, EstimatorMethod.REGENERATION, sigma_moment_form=math.sqrt(max(moment_form, 0.0))
    )
    logger.info(
        "Regeneration at lambda=%g: v=%.4f +- %.4f, sigma=%.4f from %d scans",
        params.lam, speed.estimate, speed.se, sigma_estimate.sigma, len(usable),
    )
    return speed_estimate, sigma_estimate, records


def batch_means_sigma(
    params: ModelParams,
    horizon: float,
    batches: int,
    replicas: int,
    seed: int,
    initial: Optional[InitialCondition] = None,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    half_width: Optional[int] = None,
) -> SigmaEstimate:
    """sigma^2 from non-overlapping batch increments of long runs.

    Each replica contributes the mean squared deviation of its batch
    increments from the pooled mean increment, divided by the batch length.
    """
    if batches < 2:
        raise ValueError("Batch means need at least two batches.")
    initial = initial or InitialCondition(InitialMode.EQUILIBRIUM)
    length = horizon / batches
    times = [length * j for j in range(1, batches + 1)]
    records = _walk_records(params, initial, horizon, replicas, seed, workers, max_events, times=times,
                            half_width=half_width)
    clean = _clean(records, "batch means")
    positions = np.array([r["positions"] for r in clean], dtype=np.float64)
    increments = np.diff(np.concatenate([np.zeros((positions.shape[0], 1)), positions], axis=1), axis=1)
    centre = increments.mean()
    per_replica = ((increments - centre) ** 2).mean(axis=1) / length
    variance = mean_interval(per_replica)
    return SigmaEstimate.from_variance(variance, EstimatorMethod.BATCH_MEANS, batches=batches, batch_length=length)


def clt_diagnostic(
    params: ModelParams,
    replicas: int,
    T: float,
    v_hat: float,
    sigma_hat: float,
    seed: int,
    initial: Optional[InitialCondition] = None,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    half_width: Optional[int] = None,
) -> CltReport:
    """KS test of (W_T - v T) / (sigma sqrt(T)) and the correlation of the two half-increments."""
    if sigma_hat <= 0:
        raise ValueError("sigma_hat must be positive.")
    initial = initial or InitialCondition(InitialMode.EQUILIBRIUM)
    records = _walk_records(params, initial, T, replicas, seed, workers, max_events, times=[T / 2.0, T],
                            half_width=half_width)
    clean = _clean(records, "the CLT diagnostic")
    positions = np.array([r["positions"] for r in clean], dtype=np.float64)
    z = (positions[:, 1] - v_hat * T) / (sigma_hat * math.sqrt(T))
    ks = stats.kstest(z, "norm")
    first = positions[:, 0] - v_hat * T / 2.0
    second = positions[:, 1] - positions[:, 0] - v_hat * T / 2.0
    corr = float(np.corrcoef(first, second)[0, 1]) if first.std() > 0 and second.std() > 0 else math.nan
    n = len(clean)
    return CltReport(float(ks.statistic), float(ks.pvalue), corr, 3.0 / math.sqrt(n), n, float(T))


def cramer_rate(alpha: float, beta: float, x: float) -> float:
    """Rate function of a walk stepping +1 at rate alpha and -1 at rate beta."""
    root = math.sqrt(x * x + 4.0 * alpha * beta)
    theta = math.log((x + root) / (2.0 * alpha))
    return theta * x - root + alpha + beta


def homogeneous_exceedance_log_probability(alpha: float, beta: float, t: float, v: float, epsilon: float) -> float:
    """log P(|W_t / t - v| >= epsilon) for the homogeneous walk, W_t a difference of Poisson counts."""
    k = np.arange(0, int(beta * t + 40.0 * math.sqrt(beta * t + 1.0) + 50))
    log_down = stats.poisson.logpmf(k, beta * t)
    upper = math.ceil(t * (v + epsilon) - 1e-9)
    lower = math.floor(t * (v - epsilon) + 1e-9)
    # P(W >= upper) = sum_k P(down = k) P(up >= upper + k), and P(W <= lower) likewise
    log_hi = special.logsumexp(log_down + stats.poisson.logsf(upper + k - 1, alpha * t))
    log_lo = special.logsumexp(log_down + stats.poisson.logcdf(lower + k, alpha * t))
    return float(np.logaddexp(log_hi, log_lo))


def ldp_decay(
    params: ModelParams,
    epsilon: float,
    t_grid: Sequence[float],
    replicas: int,
    v_hat: float,
    seed: int,
    initial: Optional[InitialCondition] = None,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    half_width: Optional[int] = None,
) -> LdpReport:
    """t^-1 log P(|W_t / t - v_hat| >= epsilon) for each t on the grid.

    With fewer than five exceedances the rate is an upper bound computed
    from (count + 3) / replicas.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive.")
    grid = sorted(float(t) for t in t_grid)
    initial = initial or InitialCondition(InitialMode.EQUILIBRIUM)
    records = _walk_records(params, initial, grid[-1], replicas, seed, workers, max_events, times=grid,
                            half_width=half_width)
    clean = _clean(records, "LDP decay rates")
    positions = np.array([r["positions"] for r in clean], dtype=np.float64)
    n = len(clean)
    homogeneous = params.alpha0 == params.alpha1 and params.beta0 == params.beta1
    rows = []
    for j, t in enumerate(grid):
        count = int(np.sum(np.abs(positions[:, j] / t - v_hat) >= epsilon))
        bound = count < MIN_LDP_EXCEEDANCES
        p = (count + 3) / n if bound else count / n
        exact = cramer = None
        if homogeneous:
            a, b = params.alpha0, params.beta0
            exact = homogeneous_exceedance_log_probability(a, b, t, params.v0, epsilon) / t
            cramer = -min(cramer_rate(a, b, params.v0 + epsilon), cramer_rate(a, b, params.v0 - epsilon))
        rows.append(LdpRow(t, count, n, math.log(min(p, 1.0)) / t, bound, exact, cramer))
    report = LdpReport(float(epsilon), float(v_hat), rows)
    if report.upper_bounds_only:
        logger.warning("No t on the grid had %d exceedances; rates are upper bounds only", MIN_LDP_EXCEEDANCES)
    return report
