"""The random walk driven by a Poisson clock and uniforms on top of a contact-process trajectory."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from . import kernels
from .contact import Configuration, ConfigTrajectory
from .errors import OutOfRangeError
from .events import EventLog
from .params import BOUNDARY_MARGIN, ModelParams
from .rng import Substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WalkDriver:
    """Jump times J_1 < J_2 < ... (J_0 = 0 implicit) and one uniform per jump."""

    jump_times: np.ndarray
    uniforms: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.jump_times.shape != self.uniforms.shape:
            raise ValueError("Driver needs one uniform per jump time.")
        if self.jump_times.size and (np.any(np.diff(self.jump_times) <= 0) or self.jump_times[0] <= 0):
            raise ValueError("Jump times must be positive and strictly increasing.")
        if self.jump_times.size and self.jump_times[-1] > self.horizon:
            raise ValueError("Jump times must not exceed the driver horizon.")

    @classmethod
    def frozen(cls, horizon: float) -> "WalkDriver":
        return cls(np.empty(0), np.empty(0), float(horizon))

    @property
    def count(self) -> int:
        return int(self.jump_times.shape[0])

    def count_until(self, t: float) -> int:
        """N_t, the number of jumps in (0, t]."""
        return int(np.searchsorted(self.jump_times, t, side="right"))

    def truncated(self, horizon: float) -> "WalkDriver":
        k = self.count_until(horizon)
        return WalkDriver(self.jump_times[:k], self.uniforms[:k], float(horizon))


def sample_driver(params: ModelParams, horizon: float, stream: Substream) -> WalkDriver:
    if horizon < 0:
        raise ValueError(f"Driver horizon must be non-negative, got {horizon}.")
    if horizon == 0:
        return WalkDriver.frozen(0.0)
    rng = stream.generator()
    count = int(rng.poisson(params.gamma * horizon))
    times = np.sort(rng.uniform(0.0, horizon, count))
    uniforms = rng.random(count)
    # jump times must be positive and strictly increasing
    times = np.maximum.accumulate(np.maximum(times, np.nextafter(0.0, 1.0)))
    dup = np.nonzero(np.diff(times) <= 0)[0] + 1
    for i in dup:
        times[i] = np.nextafter(times[i - 1], np.inf)
    return WalkDriver(times, uniforms, float(horizon))


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Skeleton positions S_0..S_k (absolute sites) with W_t = S_{N_t}.

    ``env_states[j]`` is the state of S_j's site seen at jump j + 1. When
    the walk left the window the path stops at the last valid jump.
    """

    positions: np.ndarray
    jump_times: np.ndarray
    env_states: np.ndarray
    horizon: float
    gamma: float
    contaminated: bool

    @property
    def jumps(self) -> int:
        return int(self.positions.shape[0] - 1)

    @property
    def truncated(self) -> bool:
        return self.jumps < self.jump_times.shape[0]

    @property
    def valid_until(self) -> float:
        """Last time up to which W is known."""
        if not self.truncated:
            return self.horizon
        return float(np.nextafter(self.jump_times[self.jumps], -np.inf))

    def count_at(self, t: float) -> int:
        return int(np.searchsorted(self.jump_times[: self.jumps], t, side="right"))

    def position_at(self, t: float) -> int:
        if t < 0 or t > self.horizon:
            raise OutOfRangeError(f"Time {t} lies outside the walk range [0, {self.horizon}].")
        if t > self.valid_until:
            raise OutOfRangeError(f"Walk left the window before time {t}.")
        return int(self.positions[self.count_at(t)])

    def positions_at(self, times: Sequence[float]) -> np.ndarray:
        idx = np.searchsorted(self.jump_times[: self.jumps], np.asarray(times, dtype=np.float64), side="right")
        return self.positions[idx]

    def to_dataframe(self) -> pd.DataFrame:
        k = self.jumps
        return pd.DataFrame(
            {
                "jump_index": np.arange(1, k + 1),
                "time": self.jump_times[:k],
                "position": self.positions[1:],
                "env_state": self.env_states[:k].astype(np.int64),
            }
        )

    def export_csv(self, path: Union[str, Path]):
        self.to_dataframe().to_csv(path, index=False)


@dataclass(frozen=True, eq=False)
class JumpDecomposition:
    """Jumps split by the state of the site they were taken from.

    ``healthy_counts[k]`` and ``infected_counts[k]`` count the first k jumps
    by type; S0 and S1 are the partial sums of the steps of each type.
    """

    path: WalkPath
    healthy_counts: np.ndarray
    infected_counts: np.ndarray
    healthy_walk: np.ndarray
    infected_walk: np.ndarray

    def counts_at(self, t: float):
        k = self.path.count_at(t)
        return int(self.healthy_counts[k]), int(self.infected_counts[k])

    def recomposed_at(self, t: float) -> int:
        n0, n1 = self.counts_at(t)
        return int(self.path.positions[0] + self.healthy_walk[n0] + self.infected_walk[n1])

    @property
    def rho_eff(self) -> float:
        if self.path.horizon == 0:
            return math.nan
        return float(self.infected_counts[-1]) / (self.path.gamma * self.path.horizon)

    @property
    def healthy_fraction(self) -> float:
        if self.path.horizon == 0:
            return math.nan
        return float(self.healthy_counts[-1]) / (self.path.gamma * self.path.horizon)


def _walk(traj: ConfigTrajectory, params: ModelParams, driver: WalkDriver, start: int) -> WalkPath:
    if driver.horizon > traj.horizon:
        raise OutOfRangeError(f"Driver horizon {driver.horizon} exceeds the trajectory horizon {traj.horizon}.")
    initial = traj.initial
    # jumps at or before the trajectory start are not part of this walk
    k0 = driver.count_until(traj.t0)
    jump_times = driver.jump_times[k0:]
    positions, envs, contaminated = kernels.walk_skeleton(
        initial.bits.copy(),
        traj.change_times,
        traj.change_sites,
        traj.change_values,
        jump_times,
        driver.uniforms[k0:],
        params.right_probability(0),
        params.right_probability(1),
        start - initial.x_min,
        BOUNDARY_MARGIN,
    )
    if contaminated:
        logger.debug("Walk from %d came within %d sites of the window edge", start, BOUNDARY_MARGIN)
    return WalkPath(
        positions=positions + initial.x_min,
        jump_times=jump_times,
        env_states=envs,
        horizon=driver.horizon,
        gamma=params.gamma,
        contaminated=bool(contaminated),
    )


def build_walk(traj: ConfigTrajectory, params: ModelParams, driver: WalkDriver, start: int = 0) -> WalkPath:
    """Walk from ``start`` at the trajectory's start time.

    Step k + 1 goes right iff U_{k+1} <= alpha_i / gamma where i is the state
    of the walker's site just after time J_{k+1}.
    """
    return _walk(traj, params, driver, start)


def build_coupled_walks(
    trajs: Sequence[ConfigTrajectory], params: ModelParams, driver: WalkDriver, start: int = 0
) -> List[WalkPath]:
    if not trajs:
        return []
    first = trajs[0]
    for traj in trajs[1:]:
        if traj.initial.x_min != first.initial.x_min or traj.initial.n_sites != first.initial.n_sites:
            raise ValueError("Coupled walks need trajectories on the same window.")
        if traj.horizon != first.horizon or traj.t0 != first.t0:
            raise ValueError("Coupled walks need trajectories over the same time range.")
    return [_walk(traj, params, driver, start) for traj in trajs]


def homogeneous_walk(traj: ConfigTrajectory, params: ModelParams, driver: WalkDriver, state: int, start: int = 0) -> WalkPath:
    """Walk with the same driver in the constant environment ``state``."""
    constant = Configuration(
        traj.initial.x_min, np.full(traj.initial.n_sites, 1 if state else 0, dtype=np.uint8)
    )
    frozen = ConfigTrajectory(constant, traj.t0, traj.horizon, np.empty(0), np.empty(0, np.int64), np.empty(0, np.uint8))
    return _walk(frozen, params, driver, start)


def decompose(path: WalkPath) -> JumpDecomposition:
    k = path.jumps
    envs = path.env_states[:k].astype(np.int64)
    steps = np.diff(path.positions)
    infected = np.concatenate([[0], np.cumsum(envs)])
    healthy = np.arange(k + 1) - infected
    healthy_walk = np.concatenate([[0], np.cumsum(steps[envs == 0])])
    infected_walk = np.concatenate([[0], np.cumsum(steps[envs == 1])])
    return JumpDecomposition(path, healthy, infected, healthy_walk, infected_walk)


def healthy_jump_bound(params: ModelParams) -> float:
    """Lower bound p on the chance that a jump is taken from a healthy site."""
    g, lam = params.gamma, params.lam
    return g / ((g + 2.0 * lam) * (1.0 + g + 2.0 * lam))


def first_infection_time(traj: ConfigTrajectory, path: WalkPath) -> float:
    """inf{t >= 0: the walker's site is infected}; nan if it never happens before the horizon."""
    return float(
        kernels.first_infected_visit(
            traj.initial.bits.copy(),
            traj.change_times,
            traj.change_sites,
            traj.change_values,
            path.jump_times,
            path.positions - traj.initial.x_min,
            min(path.valid_until, traj.horizon),
        )
    )


def first_release_time(log: EventLog, path: WalkPath, infected_at: float) -> float:
    """First walk jump or cross at the walker's site after ``infected_at``; nan if none before the horizon."""
    if math.isnan(infected_at):
        return math.nan
    site = path.position_at(infected_at)
    crosses = log.crosses_at(site)
    j = int(np.searchsorted(crosses, infected_at, side="right"))
    next_cross = float(crosses[j]) if j < crosses.shape[0] else math.inf
    k = path.count_at(infected_at)
    next_jump = float(path.jump_times[k]) if k < path.jump_times.shape[0] else math.inf
    release = min(next_cross, next_jump)
    return release if release <= path.horizon else math.nan
