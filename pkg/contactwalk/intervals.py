"""Confidence intervals shared by every estimator.

Normal approximation over replica-level values; below BOOTSTRAP_THRESHOLD
replicas a percentile bootstrap with a fixed seed is used instead.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import InsufficientDataError

BOOTSTRAP_THRESHOLD = 50
BOOTSTRAP_RESAMPLES = 2000
BOOTSTRAP_SEED = 0


@dataclass(frozen=True)
class Interval:
    estimate: float
    se: float
    lower: float
    upper: float
    count: int
    method: str

    @property
    def ci(self) -> Tuple[float, float]:
        return (self.lower, self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def overlaps(self, other: "Interval") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper


def z_value(level: float = 0.95) -> float:
    return float(stats.norm.ppf(0.5 + level / 2.0))


def _require(n: int, what: str):
    if n < 2:
        raise InsufficientDataError(f"Need at least two values to estimate {what}.", {"values": n})


def _bootstrap(statistic: Callable[..., float], columns: Sequence[np.ndarray], level: float):
    n = columns[0].shape[0]
    rng = np.random.default_rng(BOOTSTRAP_SEED)
    picks = rng.integers(0, n, size=(BOOTSTRAP_RESAMPLES, n))
    draws = np.array([statistic(*(c[p] for c in columns)) for p in picks])
    draws = draws[np.isfinite(draws)]
    tail = (1.0 - level) / 2.0
    return float(np.quantile(draws, tail)), float(np.quantile(draws, 1.0 - tail)), float(draws.std(ddof=1))


def mean_interval(samples, level: float = 0.95) -> Interval:
    values = np.asarray(samples, dtype=np.float64)
    n = values.shape[0]
    _require(n, "a mean")
    estimate = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(n))
    if n < BOOTSTRAP_THRESHOLD:
        lower, upper, _ = _bootstrap(np.mean, [values], level)
        lower, upper = min(lower, estimate), max(upper, estimate)
        return Interval(estimate, se, lower, upper, n, "bootstrap")
    z = z_value(level)
    return Interval(estimate, se, estimate - z * se, estimate + z * se, n, "normal")


def _ratio(numer, denom):
    d = denom.mean()
    return numer.mean() / d if d != 0 else np.nan


def ratio_interval(numer, denom, level: float = 0.95) -> Interval:
    """Interval for E[numer] / E[denom] by the delta method."""
    a = np.asarray(numer, dtype=np.float64)
    b = np.asarray(denom, dtype=np.float64)
    n = a.shape[0]
    _require(n, "a ratio")
    mean_b = b.mean()
    if mean_b == 0:
        raise InsufficientDataError("Ratio denominator has zero mean.", {"values": n})
    ratio = float(a.mean() / mean_b)
    cov = np.cov(a, b, ddof=1)
    var = (cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]) / (n * mean_b**2)
    se = float(np.sqrt(max(var, 0.0)))
    if n < BOOTSTRAP_THRESHOLD:
        lower, upper, _ = _bootstrap(_ratio, [a, b], level)
        return Interval(ratio, se, min(lower, ratio), max(upper, ratio), n, "bootstrap")
    z = z_value(level)
    return Interval(ratio, se, ratio - z * se, ratio + z * se, n, "normal")


def proportion_interval(successes: int, trials: int, level: float = 0.95) -> Interval:
    if trials < 1:
        raise InsufficientDataError("Need at least one trial to estimate a proportion.", {"trials": trials})
    p = successes / trials
    se = float(np.sqrt(p * (1.0 - p) / trials))
    z = z_value(level)
    # Wilson score bounds
    centre = (p + z**2 / (2 * trials)) / (1 + z**2 / trials)
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / (1 + z**2 / trials)
    return Interval(float(p), se, float(centre - half), float(centre + half), trials, "wilson")


def combined_se(*intervals: Interval) -> float:
    return float(np.sqrt(sum(i.se**2 for i in intervals)))


def agree_within(a: Interval, b: Interval, k: float = 3.0) -> bool:
    return abs(a.estimate - b.estimate) <= k * combined_se(a, b)
