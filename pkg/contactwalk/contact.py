"""Contact-process evolution on a realised graphical representation."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import kernels
from .enums import InitialMode
from .errors import InsufficientDataError, OutOfRangeError
from .events import DEFAULT_MAX_EVENTS, EventLog, sample_event_log
from .intervals import Interval, mean_interval
from .params import BOUNDARY_MARGIN, ModelParams, Window
from .rng import RngStreams, Substream
from .runner import parallel_replicas

logger = logging.getLogger(__name__)

# Reference critical value of the 1d contact process, used only to warn.
LAMBDA_C_REFERENCE = 1.649
# a mean with an interval needs two values
MIN_SURVIVORS = 2


@dataclass(frozen=True, eq=False)
class Configuration:
    """One state per window site, 1 for infected and 0 for healthy."""

    x_min: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.ndim != 1 or self.bits.shape[0] < 2:
            raise ValueError("Configuration needs a one-dimensional array of at least two sites.")
        if self.bits.dtype != np.uint8:
            object.__setattr__(self, "bits", self.bits.astype(np.uint8))
        if np.any(self.bits > 1):
            raise ValueError("Configuration states must be 0 or 1.")

    @classmethod
    def full(cls, window: Window) -> "Configuration":
        return cls(window.x_min, np.ones(window.n_sites, dtype=np.uint8))

    @classmethod
    def empty(cls, window: Window) -> "Configuration":
        return cls(window.x_min, np.zeros(window.n_sites, dtype=np.uint8))

    @classmethod
    def from_sites(cls, window: Window, sites: Sequence[int]) -> "Configuration":
        bits = np.zeros(window.n_sites, dtype=np.uint8)
        for x in sites:
            bits[window.index(x)] = 1
        return cls(window.x_min, bits)

    @classmethod
    def single(cls, window: Window, x: int) -> "Configuration":
        return cls.from_sites(window, [x])

    @classmethod
    def bernoulli(cls, window: Window, p: float, rng: np.random.Generator) -> "Configuration":
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"Bernoulli density must lie in [0, 1], got {p}.")
        return cls(window.x_min, (rng.random(window.n_sites) < p).astype(np.uint8))

    @property
    def n_sites(self) -> int:
        return self.bits.shape[0]

    @property
    def x_max(self) -> int:
        return self.x_min + self.n_sites - 1

    def __getitem__(self, x: int) -> int:
        if not self.x_min <= x <= self.x_max:
            raise ValueError(f"Site {x} lies outside [{self.x_min}, {self.x_max}].")
        return int(self.bits[x - self.x_min])

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.x_min == other.x_min and np.array_equal(self.bits, other.bits)

    def __le__(self, other: "Configuration") -> bool:
        self._check_aligned(other)
        return bool(np.all(self.bits <= other.bits))

    def _check_aligned(self, other: "Configuration"):
        if self.x_min != other.x_min or self.n_sites != other.n_sites:
            raise ValueError("Configurations live on different windows.")

    def check_window(self, window: Window):
        if self.x_min != window.x_min or self.x_max != window.x_max:
            raise ValueError(
                f"Configuration on [{self.x_min}, {self.x_max}] does not match window [{window.x_min}, {window.x_max}]."
            )

    def infected_sites(self) -> np.ndarray:
        return np.nonzero(self.bits)[0] + self.x_min

    @property
    def is_empty(self) -> bool:
        return not self.bits.any()

    def density(self, margin: int = 0) -> float:
        inner = self.bits[margin : self.n_sites - margin] if margin else self.bits
        return float(inner.mean()) if inner.size else math.nan

    def restricted_below(self, z: int) -> "Configuration":
        bits = self.bits.copy()
        cut = min(max(z - self.x_min, 0), self.n_sites)
        bits[cut:] = 0
        return Configuration(self.x_min, bits)

    def to_text(self) -> str:
        return f"{self.x_min} {self.x_max}\n" + "".join("1" if b else "0" for b in self.bits.tolist()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Configuration":
        lines = text.strip().splitlines()
        if len(lines) != 2:
            raise ValueError("Configuration text needs a header line and a bit line.")
        x_min, x_max = (int(v) for v in lines[0].split())
        bits = lines[1].strip()
        if len(bits) != x_max - x_min + 1 or set(bits) - {"0", "1"}:
            raise ValueError("Configuration bit line does not match its window header.")
        return cls(x_min, np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0"))


@dataclass(frozen=True, eq=False)
class ConfigTrajectory:
    """States from ``t0`` to ``horizon`` stored as the initial state plus every flip."""

    initial: Configuration
    t0: float
    horizon: float
    change_times: np.ndarray
    change_sites: np.ndarray
    change_values: np.ndarray

    def state_at(self, t: float) -> Configuration:
        if t < self.t0 or t > self.horizon:
            raise OutOfRangeError(f"Time {t} lies outside the trajectory range [{self.t0}, {self.horizon}].")
        count = int(np.searchsorted(self.change_times, t, side="right"))
        bits = kernels.apply_changes(self.initial.bits.copy(), self.change_sites, self.change_values, count)
        return Configuration(self.initial.x_min, bits)

    @property
    def final(self) -> Configuration:
        return self.state_at(self.horizon)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.change_times,
                "changed_site": self.change_sites + self.initial.x_min,
                "new_state": self.change_values.astype(np.int64),
            }
        )

    def export_csv(self, path: Union[str, Path]):
        self.to_dataframe().to_csv(path, index=False)


@dataclass(frozen=True, eq=False)
class ClusterTrace:
    """Cluster of (source, t0): its states plus edge trajectories.

    After death the left edge is +inf and the right edge -inf.
    """

    source: int
    t0: float
    horizon: float
    states: ConfigTrajectory
    edge_times: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    death_time: float
    contaminated: bool

    @property
    def survived(self) -> bool:
        return math.isnan(self.death_time)

    def alive_at(self, t: float) -> bool:
        return self.survived or t < self.death_time

    def members_at(self, t: float) -> np.ndarray:
        return self.states.state_at(t).infected_sites()

    def _edge_index(self, t: float) -> int:
        if t < self.t0 or t > self.horizon:
            raise OutOfRangeError(f"Time {t} lies outside the trace range [{self.t0}, {self.horizon}].")
        return int(np.searchsorted(self.edge_times, t, side="right")) - 1

    def left_at(self, t: float) -> float:
        if not self.alive_at(t):
            return math.inf
        return int(self.edge_left[self._edge_index(t)])

    def right_at(self, t: float) -> float:
        if not self.alive_at(t):
            return -math.inf
        return int(self.edge_right[self._edge_index(t)])


@dataclass(frozen=True, eq=False)
class WaveEdge:
    """Right edge of the infection descending from sites below ``z`` at ``t0``."""

    z: int
    t0: float
    horizon: float
    edge_times: np.ndarray
    edge_values: np.ndarray
    death_time: float
    censored: bool

    def right_at(self, t: float) -> float:
        if t < self.t0 or t > self.horizon:
            raise OutOfRangeError(f"Time {t} lies outside the wave range [{self.t0}, {self.horizon}].")
        if not math.isnan(self.death_time) and t >= self.death_time:
            return -math.inf
        return float(self.edge_values[int(np.searchsorted(self.edge_times, t, side="right")) - 1])


@dataclass(frozen=True)
class WedgeQuery:
    apex: int
    delta: float
    iota: float
    horizon: float
    result: Optional[int]

    @property
    def found(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class InitialCondition:
    mode: InitialMode = InitialMode.EQUILIBRIUM
    p: float = 0.5
    burn_in: float = 40.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli density must lie in [0, 1], got {self.p}.")
        if self.burn_in < 0:
            raise ValueError(f"Burn-in must be non-negative, got {self.burn_in}.")

    def realise(
        self, params: ModelParams, window: Window, stream: Substream, max_events: int = DEFAULT_MAX_EVENTS
    ) -> Configuration:
        if self.mode is InitialMode.FULL:
            return Configuration.full(window)
        if self.mode is InitialMode.EMPTY:
            return Configuration.empty(window)
        if self.mode is InitialMode.BERNOULLI:
            return Configuration.bernoulli(window, self.p, stream.generator())
        return sample_equilibrium(params, window, self.burn_in, stream, max_events).configuration

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "p": self.p, "burn_in": self.burn_in}


@dataclass(frozen=True)
class EquilibriumSample:
    configuration: Configuration
    density: float
    half_burn_in_density: float
    stabilised: bool


@dataclass(frozen=True)
class IotaEstimate:
    interval: Interval
    survivors: int
    replicas: int
    contaminated: int
    horizon: float

    @property
    def iota(self) -> float:
        return self.interval.estimate

    @property
    def survival_fraction(self) -> float:
        return self.survivors / self.replicas if self.replicas else math.nan

    def to_summary(self, lam: float) -> dict:
        return {
            "lambda": lam,
            "method": "cluster-edge",
            "iota_hat": self.iota,
            "se": self.interval.se,
            "ci95": list(self.interval.ci),
            "replicas": self.replicas,
            "survivors": self.survivors,
            "survival_fraction": self.survival_fraction,
            "censoring": {"horizon": self.horizon, "contaminated": self.contaminated},
            "flags": [],
        }


def _range_check(log: EventLog, t: float, t0: float = 0.0):
    if t > log.window.horizon:
        raise OutOfRangeError(f"Time {t} exceeds the event log horizon {log.window.horizon}.")
    if t < t0:
        raise OutOfRangeError(f"Time {t} precedes the start time {t0}.")


def evolve(eta: Configuration, log: EventLog, t: float, t0: float = 0.0) -> Configuration:
    """State at time t of the process started from ``eta`` at t0 (events in (t0, t])."""
    eta.check_window(log.window)
    _range_check(log, t, t0)
    merged = log.merged
    state = eta.bits.copy()
    kernels.sweep(state, merged.times, merged.kinds, merged.sites, merged.first_after(t0), merged.last_until(t), False)
    return Configuration(eta.x_min, state)


def evolve_trajectory(eta: Configuration, log: EventLog, t0: float = 0.0) -> ConfigTrajectory:
    eta.check_window(log.window)
    _range_check(log, log.window.horizon, t0)
    merged = log.merged
    times, sites, values = kernels.sweep(
        eta.bits.copy(), merged.times, merged.kinds, merged.sites, merged.first_after(t0), len(merged), True
    )
    return ConfigTrajectory(eta, float(t0), log.window.horizon, times, sites, values)


def _near_wall(window: Window, lo_index: int, hi_index: int) -> bool:
    return lo_index <= BOUNDARY_MARGIN or hi_index >= window.n_sites - 1 - BOUNDARY_MARGIN


def cluster(log: EventLog, x: int, t0: float = 0.0) -> ClusterTrace:
    window = log.window
    _range_check(log, t0)
    eta = Configuration.single(window, x)
    merged = log.merged
    result = kernels.sweep_edges(
        eta.bits.copy(), merged.times, merged.kinds, merged.sites, merged.first_after(t0), len(merged)
    )
    chg_t, chg_s, chg_v, e_t, e_lo, e_hi, death, min_lo, max_hi, _ = result
    ix = window.index(x)
    return ClusterTrace(
        source=x,
        t0=float(t0),
        horizon=window.horizon,
        states=ConfigTrajectory(eta, float(t0), window.horizon, chg_t, chg_s, chg_v),
        edge_times=np.concatenate([[t0], e_t]),
        edge_left=np.concatenate([[ix], e_lo]) + window.x_min,
        edge_right=np.concatenate([[ix], e_hi]) + window.x_min,
        death_time=float(death),
        contaminated=_near_wall(window, min_lo, max_hi),
    )


def wave(log: EventLog, z: int, t0: float, initial: Configuration) -> WaveEdge:
    """Right edge r_{t0,s}(z) from ``initial`` (the state at t0) restricted to sites below z."""
    window = log.window
    initial.check_window(window)
    _range_check(log, t0)
    restricted = initial.restricted_below(z)
    if restricted.is_empty:
        return WaveEdge(z, float(t0), window.horizon, np.array([t0]), np.array([-math.inf]), float(t0), False)
    merged = log.merged
    result = kernels.sweep_edges(
        restricted.bits.copy(), merged.times, merged.kinds, merged.sites, merged.first_after(t0), len(merged)
    )
    _, _, _, e_t, _, e_hi, death, _, max_hi, min_hi = result
    start_hi = int(restricted.infected_sites()[-1]) - window.x_min
    times = np.concatenate([[t0], e_t])
    values = np.concatenate([[start_hi], e_hi])
    keep = np.concatenate([[True], values[1:] != values[:-1]])
    return WaveEdge(
        z=z,
        t0=float(t0),
        horizon=window.horizon,
        edge_times=times[keep],
        edge_values=(values[keep] + window.x_min).astype(np.float64),
        death_time=float(death),
        censored=bool(min_hi <= BOUNDARY_MARGIN or max_hi >= window.n_sites - 1 - BOUNDARY_MARGIN),
    )


def _interior_margin(window: Window, params: ModelParams, burn_in: float) -> int:
    return min(params.reach(burn_in), window.n_sites // 4)


def sample_equilibrium(
    params: ModelParams,
    window: Window,
    burn_in: float,
    stream: Substream,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> EquilibriumSample:
    """Approximate upper-invariant sample: all-ones evolved for ``burn_in`` on its own log.

    Densities are measured away from the walls at half and full burn-in;
    the sample counts as stabilised when they differ by at most two
    standard errors.
    """
    if burn_in == 0:
        full = Configuration.full(window)
        return EquilibriumSample(full, 1.0, 1.0, True)
    log = sample_event_log(params, window.with_horizon(burn_in), stream, max_events)
    merged = log.merged
    state = np.ones(window.n_sites, dtype=np.uint8)
    halfway = merged.last_until(burn_in / 2.0)
    kernels.sweep(state, merged.times, merged.kinds, merged.sites, 0, halfway, False)
    margin = _interior_margin(window, params, burn_in)
    half = Configuration(window.x_min, state.copy())
    kernels.sweep(state, merged.times, merged.kinds, merged.sites, halfway, len(merged), False)
    configuration = Configuration(window.x_min, state)
    d_half = half.density(margin)
    d_full = configuration.density(margin)
    count = window.n_sites - 2 * margin
    se = math.sqrt((d_half * (1 - d_half) + d_full * (1 - d_full)) / max(count, 1))
    stabilised = abs(d_full - d_half) <= 2.0 * se
    if not stabilised:
        logger.warning(
            "Burn-in of %g did not stabilise: densities %.4f (half) and %.4f (full)", burn_in, d_half, d_full
        )
    return EquilibriumSample(configuration, d_full, d_half, stabilised)


def _iota_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    horizon = payload["horizon"]
    window = Window.for_horizon(params, horizon)
    log = sample_event_log(params, window, RngStreams(payload["seed"]).env(index), payload["max_events"])
    trace = cluster(log, 0, 0.0)
    right = trace.right_at(horizon) if trace.survived else None
    return {
        "survived": bool(trace.survived),
        "contaminated": bool(trace.contaminated),
        "right_edge": None if right is None else int(right),
        "death_time": None if trace.survived else float(trace.death_time),
    }


def estimate_iota(
    params: ModelParams,
    replicas: int,
    horizon: float,
    seed: int,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
    progress: bool = False,
) -> Tuple[IotaEstimate, List[dict]]:
    """Mean of R_h(0) / h over single-source clusters alive at the horizon."""
    if params.lam <= LAMBDA_C_REFERENCE:
        logger.warning(
            "lambda=%g is at or below the reference critical value %.3f; survivors may be rare",
            params.lam,
            LAMBDA_C_REFERENCE,
        )
    payload = {"params": params, "horizon": float(horizon), "seed": seed, "max_events": max_events}
    records = parallel_replicas(_iota_replica, payload, replicas, workers, progress=progress)
    survivors = [r for r in records if r["survived"] and not r["contaminated"]]
    contaminated = sum(1 for r in records if r["contaminated"])
    if len(survivors) < MIN_SURVIVORS:
        raise InsufficientDataError(
            f"Need at least {MIN_SURVIVORS} surviving clusters to estimate the infection speed.",
            {"replicas": replicas, "survivors": len(survivors), "contaminated": contaminated},
        )
    interval = mean_interval([r["right_edge"] / horizon for r in survivors])
    logger.info("iota_hat=%.4f from %d/%d survivors", interval.estimate, len(survivors), replicas)
    return IotaEstimate(interval, len(survivors), replicas, contaminated, float(horizon)), records


def wedge_survivor_left(
    log: EventLog,
    initial: Configuration,
    x: int,
    delta: float,
    horizon: float,
    iota_hat: float,
) -> WedgeQuery:
    """First infected z < x (scanning leftwards) whose wedge-confined cluster lives to ``horizon``."""
    if not 0 < delta < iota_hat:
        raise ValueError(f"Wedge half-opening delta must lie in (0, {iota_hat}), got {delta}.")
    window = log.window
    initial.check_window(window)
    _range_check(log, horizon)
    merged = log.merged
    start = merged.first_after(0.0)
    for z in initial.infected_sites()[::-1]:
        if z >= x:
            continue
        if kernels.wedge_cluster_survives(
            window.n_sites,
            merged.times,
            merged.kinds,
            merged.sites,
            start,
            window.index(int(z)),
            0.0,
            horizon,
            iota_hat - delta,
            iota_hat + delta,
        ):
            return WedgeQuery(x, delta, iota_hat, horizon, int(z))
    return WedgeQuery(x, delta, iota_hat, horizon, None)


def wide_spread_markers(
    log: EventLog,
    initial: Configuration,
    iota_hat: float,
    horizon: float,
    sites: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """Initially infected sites whose cluster keeps both edges floor(iota_hat t / 2) away up to ``horizon``."""
    if iota_hat <= 0:
        raise ValueError(f"iota_hat must be positive, got {iota_hat}.")
    window = log.window
    initial.check_window(window)
    _range_check(log, horizon)
    merged = log.merged
    candidates = initial.infected_sites()
    if sites is not None:
        candidates = candidates[(candidates >= sites[0]) & (candidates <= sites[1])]
    found = [
        int(x)
        for x in candidates
        if kernels.spreads_widely(
            window.n_sites, merged.times, merged.kinds, merged.sites, window.index(int(x)), horizon, iota_hat / 2.0
        )
    ]
    return np.asarray(found, dtype=np.int64)


def _density_replica(index: int, payload: dict) -> dict:
    params: ModelParams = payload["params"]
    window = payload["window"]
    burn_in = payload["burn_in"]
    sample = sample_equilibrium(params, window, burn_in, RngStreams(payload["seed"]).init(index), payload["max_events"])
    margin = _interior_margin(window, params, burn_in)
    return {
        "density": sample.density,
        "origin_infected": bool(sample.configuration[0] == 1) if window.contains(0) else None,
        "stabilised": bool(sample.stabilised),
        "interior_sites": window.n_sites - 2 * margin,
    }


def equilibrium_density(
    params: ModelParams,
    replicas: int,
    window: Window,
    burn_in: float,
    seed: int,
    workers: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Interval:
    """Mean interior density of burn-in samples, an estimate of rho_lambda."""
    payload = {"params": params, "window": window, "burn_in": float(burn_in), "seed": seed, "max_events": max_events}
    records = parallel_replicas(_density_replica, payload, replicas, workers)
    unstable = sum(1 for r in records if not r["stabilised"])
    if unstable:
        logger.info("%d of %d burn-in samples did not stabilise", unstable, replicas)
    return mean_interval([r["density"] for r in records])
