"""Exact pathwise properties, checked over randomised small instances."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from . import kernels
from .contact import ConfigTrajectory, Configuration, cluster, evolve, evolve_trajectory, wave, wide_spread_markers
from .decorators import CheckResult, invariant_check
from .enums import CheckStatus
from .events import EventLog, sample_event_log
from .params import ModelParams, Window
from .regen import left_tracer, trial_time
from .rng import RngStreams
from .stats import subadditive_triple
from .walker import WalkPath, build_coupled_walks, build_walk, decompose, homogeneous_walk, sample_driver

logger = logging.getLogger(__name__)


@dataclass
class _Instance:
    params: ModelParams
    window: Window
    log: EventLog
    rng: np.random.Generator
    trial: int
    salt: int


def _passed(trials: int, violations: int, what: str, first: str = "") -> Dict[str, Any]:
    if violations:
        return {
            "status": "failed",
            "details": f"{violations} of {trials} trials violated {what}. First: {first}",
            "trials": trials,
            "violations": violations,
        }
    return {"status": "passed", "details": f"{what} held in all {trials} trials.", "trials": trials, "violations": 0}


class InvariantSuite:
    HALF_WIDTH = 12
    HORIZON = 6.0
    LAMBDA_MIN = 0.5
    LAMBDA_MAX = 5.0
    # rates are multiples of RATE_STEP so alpha_i + beta_i is exact
    RATE_STEP = 1.0 / 16.0

    def __init__(self, trials: int, seed: int = 0):
        if not isinstance(trials, int) or trials < 1:
            raise ValueError("Trial count must be a positive integer.")
        self.trials = trials
        self.seed = seed
        self.streams = RngStreams(seed)
        self.results: List[CheckResult] = []

    def __str__(self) -> str:
        return f"InvariantSuite(trials={self.trials}, seed={self.seed})"

    def __repr__(self) -> str:
        return f"InvariantSuite(trials={self.trials!r}, seed={self.seed!r})"

    def _random_params(self, rng: np.random.Generator, lam_min: Optional[float] = None) -> ModelParams:
        lam = float(rng.uniform(lam_min or self.LAMBDA_MIN, self.LAMBDA_MAX))
        steps = int(rng.integers(8, 33))
        low, high = sorted(int(a) for a in rng.integers(1, steps, size=2))
        gamma = steps * self.RATE_STEP
        alpha0, alpha1 = low * self.RATE_STEP, high * self.RATE_STEP
        return ModelParams(lam, alpha0, gamma - alpha0, alpha1, gamma - alpha1)

    def _instance(self, trial: int, salt: int, lam_min: Optional[float] = None) -> _Instance:
        rng = self.streams.init(trial).child(salt).generator()
        params = self._random_params(rng, lam_min)
        window = Window.around_origin(self.HALF_WIDTH, self.HORIZON)
        log = sample_event_log(params, window, self.streams.env(trial).child(salt))
        return _Instance(params, window, log, rng, trial, salt)

    def _walk(self, inst: _Instance, eta: Configuration) -> WalkPath:
        driver = sample_driver(inst.params, inst.window.horizon, self.streams.walk(inst.trial).child(inst.salt))
        return build_walk(evolve_trajectory(eta, inst.log), inst.params, driver)

    @staticmethod
    def _pair(inst: _Instance):
        lower = Configuration.bernoulli(inst.window, float(inst.rng.uniform(0.1, 0.9)), inst.rng)
        extra = Configuration.bernoulli(inst.window, float(inst.rng.uniform(0.1, 0.9)), inst.rng)
        upper = Configuration(lower.x_min, lower.bits | extra.bits)
        return lower, upper

    @staticmethod
    def _first_order_break(lower: ConfigTrajectory, upper: ConfigTrajectory) -> Optional[float]:
        """Earliest flip time after which lower <= upper fails (-inf if not ordered at the start)."""
        lo, hi = lower.initial.bits.copy(), upper.initial.bits.copy()
        if np.any(lo > hi):
            return -np.inf
        i = j = 0
        for t in np.union1d(lower.change_times, upper.change_times):
            while i < lower.change_times.shape[0] and lower.change_times[i] <= t:
                lo[lower.change_sites[i]] = lower.change_values[i]
                i += 1
            while j < upper.change_times.shape[0] and upper.change_times[j] <= t:
                hi[upper.change_sites[j]] = upper.change_values[j]
                j += 1
            if np.any(lo > hi):
                return float(t)
        return None

    @invariant_check("attractiveness")
    def attractiveness(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 1)
            lower, upper = self._pair(inst)
            broken = self._first_order_break(evolve_trajectory(lower, inst.log), evolve_trajectory(upper, inst.log))
            if broken is not None:
                violations += 1
                first = first or f"trial {trial}, t={broken:.4f}"
        return _passed(self.trials, violations, "eta <= eta' implies xi_t(eta) <= xi_t(eta')", first)

    @invariant_check("sandwich_determinism")
    def sandwich_determinism(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 2)
            x = int(inst.rng.integers(-self.HALF_WIDTH // 2, self.HALF_WIDTH // 2 + 1))
            trace = cluster(inst.log, x, 0.0)
            etas = [Configuration.full(inst.window), Configuration.single(inst.window, x)]
            for _ in range(2):
                eta = Configuration.bernoulli(inst.window, 0.5, inst.rng)
                eta.bits[inst.window.index(x)] = 1
                etas.append(eta)
            for t in np.sort(inst.rng.uniform(0.0, inst.window.horizon, 4)):
                if not trace.alive_at(t):
                    break
                lo, hi = trace.left_at(t), trace.right_at(t)
                span = slice(inst.window.index(lo), inst.window.index(hi) + 1)
                states = [evolve(eta, inst.log, float(t)).bits[span] for eta in etas]
                if any(not np.array_equal(states[0], s) for s in states[1:]):
                    violations += 1
                    first = first or f"trial {trial}, x={x}, t={t:.4f}"
                    break
        return _passed(self.trials, violations, "xi_t(eta) is fixed on [L_t(x), R_t(x)] when eta(x) = 1", first)

    @invariant_check("cluster_evolve_coherence")
    def cluster_evolve_coherence(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 3)
            eta = Configuration.bernoulli(inst.window, 0.3, inst.rng)
            t = float(inst.rng.uniform(0.0, inst.window.horizon))
            union = np.zeros(inst.window.n_sites, dtype=np.uint8)
            for x in eta.infected_sites():
                members = cluster(inst.log, int(x), 0.0).members_at(t)
                union[members - inst.window.x_min] = 1
            if not np.array_equal(union, evolve(eta, inst.log, t).bits):
                violations += 1
                first = first or f"trial {trial}, t={t:.4f}"
        return _passed(self.trials, violations, "xi_t(eta) is the union of the clusters of infected sites", first)

    @invariant_check("edge_consistency")
    def edge_consistency(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 4)
            trace = cluster(inst.log, 0, 0.0)
            step_right = wave(inst.log, 1, 0.0, Configuration.full(inst.window))
            above = Configuration(inst.window.x_min, (np.arange(inst.window.n_sites) >= inst.window.index(0)).astype(np.uint8))
            for t in np.concatenate([trace.edge_times, inst.rng.uniform(0.0, inst.window.horizon, 5)]):
                if not trace.alive_at(t):
                    continue
                leftmost = int(evolve(above, inst.log, float(t)).infected_sites()[0])
                if trace.right_at(t) != step_right.right_at(t) or trace.left_at(t) != leftmost:
                    violations += 1
                    first = first or f"trial {trial}, t={t:.4f}"
                    break
        return _passed(self.trials, violations, "single-source edges equal the step-initial edges while alive", first)

    @invariant_check("wave_supremum")
    def wave_supremum(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 5)
            eta = Configuration.bernoulli(inst.window, 0.4, inst.rng)
            z = int(inst.rng.integers(-4, 5))
            edge = wave(inst.log, z, 0.0, eta)
            traces = [cluster(inst.log, int(y), 0.0) for y in eta.infected_sites() if y < z]
            for t in inst.rng.uniform(0.0, inst.window.horizon, 5):
                expected = max([tr.right_at(t) for tr in traces], default=-np.inf)
                if edge.right_at(t) != expected:
                    violations += 1
                    first = first or f"trial {trial}, z={z}, t={t:.4f}"
                    break
        return _passed(self.trials, violations, "the wave edge is the maximum of per-source right edges", first)

    @invariant_check("walk_monotonicity")
    def walk_monotonicity(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 6)
            lower, upper = self._pair(inst)
            driver = sample_driver(inst.params, inst.window.horizon, self.streams.walk(trial).child(6))
            trajs = [evolve_trajectory(eta, inst.log) for eta in (lower, upper)]
            low, high = build_coupled_walks(trajs, inst.params, driver)
            k = min(low.jumps, high.jumps)
            if np.any(low.positions[: k + 1] > high.positions[: k + 1]):
                violations += 1
                first = first or f"trial {trial}"
        return _passed(self.trials, violations, "W(xi) <= W(xi') under a shared driver", first)

    @invariant_check("homogeneous_bracket")
    def homogeneous_bracket(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 7)
            eta = Configuration.bernoulli(inst.window, 0.5, inst.rng)
            driver = sample_driver(inst.params, inst.window.horizon, self.streams.walk(trial).child(7))
            traj = evolve_trajectory(eta, inst.log)
            path = build_walk(traj, inst.params, driver)
            healthy = homogeneous_walk(traj, inst.params, driver, 0)
            infected = homogeneous_walk(traj, inst.params, driver, 1)
            k = min(path.jumps, healthy.jumps, infected.jumps)
            if np.any(healthy.positions[: k + 1] > path.positions[: k + 1]) or np.any(
                path.positions[: k + 1] > infected.positions[: k + 1]
            ):
                violations += 1
                first = first or f"trial {trial}"
        return _passed(self.trials, violations, "W(all healthy) <= W <= W(all infected)", first)

    @invariant_check("walk_bound")
    def walk_bound(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 8)
            path = self._walk(inst, Configuration.bernoulli(inst.window, 0.5, inst.rng))
            if np.any(np.abs(path.positions - path.positions[0]) > np.arange(path.jumps + 1)):
                violations += 1
                first = first or f"trial {trial}"
        return _passed(self.trials, violations, "|W_t| <= N_t", first)

    @invariant_check("increment_bound")
    def increment_bound(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 9)
            path = self._walk(inst, Configuration.bernoulli(inst.window, 0.5, inst.rng))
            if path.truncated:
                continue
            for n in range(int(inst.window.horizon)):
                a, b = path.count_at(float(n)), path.count_at(float(n + 1))
                spread = np.abs(path.positions[a : b + 1] - path.positions[a]).max()
                if spread > b - a:
                    violations += 1
                    first = first or f"trial {trial}, n={n}"
                    break
        return _passed(self.trials, violations, "sup_{s<=1} |W_{n+s} - W_n| <= N_{n+1} - N_n", first)

    @invariant_check("jump_decomposition")
    def jump_decomposition(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 10)
            path = self._walk(inst, Configuration.bernoulli(inst.window, 0.5, inst.rng))
            dec = decompose(path)
            times = np.concatenate([path.jump_times[: path.jumps], inst.rng.uniform(0.0, path.valid_until, 10)])
            for t in times:
                n0, n1 = dec.counts_at(float(t))
                if n0 + n1 != path.count_at(float(t)) or dec.recomposed_at(float(t)) != path.position_at(float(t)):
                    violations += 1
                    first = first or f"trial {trial}, t={t:.4f}"
                    break
        return _passed(self.trials, violations, "W_t = S0(N0_t) + S1(N1_t)", first)

    @invariant_check("subadditivity")
    def subadditivity(self) -> Dict[str, Any]:
        violations, first, used = 0, "", 0
        for trial in range(self.trials):
            rng = self.streams.init(trial).child(11).generator()
            n = int(rng.integers(1, 7))
            m = int(rng.integers(0, n + 1))
            params = self._random_params(rng)
            triple = subadditive_triple(params, m, n, self.seed, replica=trial)
            if triple.contaminated:
                continue
            used += 1
            if not triple.holds:
                violations += 1
                first = first or f"trial {trial}, m={m}, n={n}: {triple}"
        return _passed(used, violations, "X_{0,n} <= X_{0,m} + X_{m,n}", first)

    @invariant_check("safe_region_agreement")
    def safe_region_agreement(self) -> Dict[str, Any]:
        violations, first = 0, ""
        for trial in range(self.trials):
            inst = self._instance(trial, 12, lam_min=2.5)
            iota = float(inst.rng.uniform(0.5, 2.5))
            lower = Configuration.bernoulli(inst.window, 0.5, inst.rng)
            horizon = inst.window.horizon
            markers = wide_spread_markers(inst.log, lower, iota, horizon)
            merged = inst.log.merged
            _, bad, _ = kernels.coupling_scan(
                lower.bits.copy(),
                Configuration.full(inst.window).bits,
                merged.times,
                merged.kinds,
                merged.sites,
                horizon,
                inst.window.index(0),
                1.0,
                markers - inst.window.x_min,
                iota,
            )
            if bad:
                violations += 1
                first = first or f"trial {trial}: {bad} disagreements, markers {markers.tolist()}"
        return _passed(self.trials, violations, "no disagreement inside the safe region", first)

    @invariant_check("trial_composition")
    def trial_composition(self) -> Dict[str, Any]:
        violations, first, used = 0, "", 0
        for trial in range(self.trials):
            inst = self._instance(trial, 13)
            eta = Configuration.bernoulli(inst.window, 0.7, inst.rng)
            traj = evolve_trajectory(eta, inst.log)
            driver = sample_driver(inst.params, inst.window.horizon, self.streams.walk(trial).child(13))
            path = build_walk(traj, inst.params, driver)
            t = float(inst.rng.uniform(0.0, min(path.valid_until, inst.window.horizon / 2)))
            confirm = inst.window.horizon / 4
            outcome = trial_time(inst.log, traj, path, t, confirm)
            failure = outcome.failure
            if not failure.failed:
                if outcome.time != np.inf:
                    violations += 1
                    first = first or f"trial {trial}: finite trial time without a failure"
                continue
            if outcome.censored:
                continue
            used += 1
            y = left_tracer(inst.log, path.position_at(t), t).position_at(failure.time)
            edge = wave(inst.log, y, failure.time, traj.state_at(failure.time))
            hit = outcome.time
            if y != outcome.tracer_site or hit < failure.time or path.position_at(hit) != edge.right_at(hit):
                violations += 1
                first = first or f"trial {trial}, t={t:.4f}, F={failure.time:.4f}, T={hit:.4f}"
        return _passed(used, violations, "T_t = V_{F_t}(Y_{t,F_t}(W_t))", first)

    def run_all(self) -> List[CheckResult]:
        logger.info("Running invariant suite with %d trials per check", self.trials)
        self.results = [
            self.attractiveness(),
            self.sandwich_determinism(),
            self.cluster_evolve_coherence(),
            self.edge_consistency(),
            self.wave_supremum(),
            self.walk_monotonicity(),
            self.homogeneous_bracket(),
            self.walk_bound(),
            self.increment_bound(),
            self.jump_decomposition(),
            self.subadditivity(),
            self.safe_region_agreement(),
            self.trial_composition(),
        ]
        return self.results

    @property
    def violated(self) -> List[CheckResult]:
        return [r for r in self.results if r["status"] != CheckStatus.PASSED.value]
