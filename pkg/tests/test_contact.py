import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from contactwalk.contact import (
    Configuration,
    InitialCondition,
    cluster,
    equilibrium_density,
    estimate_iota,
    evolve,
    evolve_trajectory,
    sample_equilibrium,
    wave,
    wedge_survivor_left,
    wide_spread_markers,
)
from contactwalk.enums import InitialMode
from contactwalk.errors import InsufficientDataError, OutOfRangeError
from contactwalk.events import EventLog
from contactwalk.params import ModelParams, Window
from contactwalk.rng import RngStreams


def small_log():
    """Seven-site example: the cluster of 0 survives, the cluster of 2 dies at 3.26."""
    window = Window.around_origin(6, 11.0)
    arrows = {-3: [3.0, 8.5], -2: [7.5], -1: [2.0], 0: [5.0], 1: [6.0, 9.7], 2: [7.0]}
    crosses = {-3: [1.26, 9.26], -2: [4.26], 0: [6.16], 1: [8.26], 2: [3.26], 3: [10.46]}
    return EventLog.from_event_lists(window, 1.0, crosses, arrows)


def brute_force_cluster(log, x, t):
    """Sites reachable from (x, 0) by paths that follow arrows and avoid crosses, by direct replay."""
    reach = {x}
    events = []
    for y in range(log.window.x_min, log.window.x_max + 1):
        events += [(float(s), 0, y) for s in log.crosses_at(y)]
        if y < log.window.x_max:
            events += [(float(s), 1, y) for s in log.arrows_on(y)]
    for s, kind, y in sorted(events):
        if s > t:
            break
        if kind == 0:
            reach.discard(y)
        elif (y in reach) != (y + 1 in reach):
            reach |= {y, y + 1}
    return sorted(reach)


class TestConfiguration(unittest.TestCase):

    def setUp(self):
        self.window = Window.around_origin(3, 1.0)

    def test_constructors_and_order(self):
        full = Configuration.full(self.window)
        empty = Configuration.empty(self.window)
        some = Configuration.from_sites(self.window, [-1, 2])
        self.assertTrue(empty <= some <= full)
        self.assertFalse(full <= some)
        self.assertEqual(some[-1], 1)
        self.assertEqual(some[0], 0)
        self.assertTrue(empty.is_empty)
        np.testing.assert_array_equal(some.infected_sites(), [-1, 2])
        self.assertEqual(Configuration.single(self.window, 2), Configuration.from_sites(self.window, [2]))

    def test_restricted_below(self):
        full = Configuration.full(self.window)
        np.testing.assert_array_equal(full.restricted_below(1).infected_sites(), [-3, -2, -1, 0])
        self.assertTrue(full.restricted_below(-3).is_empty)

    def test_text_format(self):
        some = Configuration.from_sites(self.window, [-3, 0, 1])
        text = some.to_text()
        self.assertEqual(text, "-3 3\n1001100\n")
        self.assertEqual(Configuration.from_text(text), some)
        with self.assertRaises(ValueError):
            Configuration.from_text("-3 3\n10\n")

    def test_invalid_states(self):
        with self.assertRaises(ValueError):
            Configuration(0, np.array([0, 2], dtype=np.uint8))
        with self.assertRaises(ValueError):
            Configuration.full(self.window).check_window(Window.around_origin(4, 1.0))
        with self.assertRaises(ValueError):
            Configuration.bernoulli(self.window, 1.5, np.random.default_rng(0))


class TestEvolution(unittest.TestCase):

    def setUp(self):
        self.log = small_log()
        self.window = self.log.window

    def test_cluster_of_origin(self):
        trace = cluster(self.log, 0)
        self.assertTrue(trace.survived)
        self.assertFalse(trace.contaminated)
        np.testing.assert_array_equal(trace.members_at(11.0), [-2, -1, 1, 2])
        for t in (1.0, 4.0, 6.5, 8.3, 9.9, 11.0):
            np.testing.assert_array_equal(trace.members_at(t), brute_force_cluster(self.log, 0, t))

    def test_cluster_edges(self):
        trace = cluster(self.log, 0)
        self.assertEqual(trace.left_at(1.99), 0)
        self.assertEqual(trace.left_at(2.0), -1)
        self.assertEqual(trace.left_at(8.6), -3)
        self.assertEqual(trace.left_at(9.3), -2)
        self.assertEqual(trace.right_at(4.9), 0)
        self.assertEqual(trace.right_at(7.2), 3)
        self.assertEqual(trace.right_at(11.0), 2)

    def test_dying_cluster(self):
        trace = cluster(self.log, 2)
        self.assertFalse(trace.survived)
        self.assertEqual(trace.death_time, 3.26)
        self.assertTrue(trace.alive_at(3.0))
        self.assertFalse(trace.alive_at(3.26))
        self.assertEqual(trace.left_at(5.0), math.inf)
        self.assertEqual(trace.right_at(5.0), -math.inf)

    def test_evolve_uses_events_up_to_and_including_t(self):
        single = Configuration.single(self.window, 0)
        np.testing.assert_array_equal(evolve(single, self.log, 1.999).infected_sites(), [0])
        np.testing.assert_array_equal(evolve(single, self.log, 2.0).infected_sites(), [-1, 0])
        # a start at t0 = 2 does not replay the arrow at 2
        np.testing.assert_array_equal(evolve(single, self.log, 4.0, t0=2.0).infected_sites(), [0])

    def test_evolve_range_checks(self):
        full = Configuration.full(self.window)
        with self.assertRaises(OutOfRangeError):
            evolve(full, self.log, 12.0)
        with self.assertRaises(OutOfRangeError):
            evolve(full, self.log, 1.0, t0=2.0)

    def test_sandwich_on_cluster_span(self):
        full = evolve(Configuration.full(self.window), self.log, 11.0)
        self.assertEqual([full[y] for y in range(-2, 3)], [1, 1, 0, 1, 1])

    def test_trajectory_matches_evolve(self):
        eta = Configuration.from_sites(self.window, [-2, 0, 3])
        traj = evolve_trajectory(eta, self.log)
        for t in (0.0, 2.0, 5.5, 8.26, 10.0, 11.0):
            self.assertEqual(traj.state_at(t), evolve(eta, self.log, t))
        self.assertEqual(traj.final, evolve(eta, self.log, 11.0))
        with self.assertRaises(OutOfRangeError):
            traj.state_at(11.5)

    def test_trajectory_csv(self):
        traj = evolve_trajectory(Configuration.single(self.window, 0), self.log)
        df = traj.to_dataframe()
        self.assertEqual(list(df.columns), ["time", "changed_site", "new_state"])
        self.assertEqual(df.iloc[0].tolist(), [2.0, -1, 1])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "traj.csv"
            traj.export_csv(path)
            self.assertEqual(len(pd.read_csv(path)), len(df))

    def test_wave_from_step_matches_cluster_edge(self):
        trace = cluster(self.log, 0)
        edge = wave(self.log, 1, 0.0, Configuration.full(self.window))
        for t in (0.0, 2.5, 5.5, 6.5, 7.2, 10.0, 10.5, 10.9):
            self.assertEqual(edge.right_at(t), trace.right_at(t))

    def test_wave_of_dying_source(self):
        edge = wave(self.log, 3, 0.0, Configuration.single(self.window, 2))
        self.assertEqual(edge.right_at(1.0), 2.0)
        self.assertEqual(edge.death_time, 3.26)
        self.assertEqual(edge.right_at(4.0), -math.inf)
        empty = wave(self.log, 2, 0.0, Configuration.single(self.window, 2))
        self.assertEqual(empty.right_at(0.0), -math.inf)


class TestMarkers(unittest.TestCase):

    def test_wide_spread_markers(self):
        log = small_log()
        initial = Configuration.from_sites(log.window, [0, 2])
        np.testing.assert_array_equal(wide_spread_markers(log, initial, 0.4, 11.0), [0])
        self.assertEqual(wide_spread_markers(log, initial, 0.6, 11.0).size, 0)
        with self.assertRaises(ValueError):
            wide_spread_markers(log, initial, 0.0, 11.0)

    def test_wedge_survivor(self):
        window = Window.around_origin(6, 4.0)
        log = EventLog.from_event_lists(window, 1.0, {}, {0: [1.0], 1: [2.5]})
        both = Configuration.from_sites(window, [-3, 0])
        query = wedge_survivor_left(log, both, 2, 0.5, 4.0, 1.0)
        self.assertTrue(query.found)
        self.assertEqual(query.result, 0)
        lonely = wedge_survivor_left(log, Configuration.from_sites(window, [-3]), 2, 0.5, 4.0, 1.0)
        self.assertFalse(lonely.found)
        with self.assertRaises(ValueError):
            wedge_survivor_left(log, both, 2, 1.5, 4.0, 1.0)


class TestEquilibriumAndIota(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(4.0, 0.25, 0.75, 0.75, 0.25)

    def test_zero_burn_in_is_all_ones(self):
        window = Window.around_origin(10, 1.0)
        sample = sample_equilibrium(self.params, window, 0.0, RngStreams(0).init(0))
        self.assertEqual(sample.configuration, Configuration.full(window))
        self.assertTrue(sample.stabilised)

    def test_initial_condition_modes(self):
        window = Window.around_origin(10, 1.0)
        stream = RngStreams(3).init(0)
        self.assertTrue(InitialCondition(InitialMode.EMPTY).realise(self.params, window, stream).is_empty)
        a = InitialCondition(InitialMode.BERNOULLI, p=0.5).realise(self.params, window, stream)
        b = InitialCondition(InitialMode.BERNOULLI, p=0.5).realise(self.params, window, stream)
        self.assertEqual(a, b)
        with self.assertRaises(ValueError):
            InitialCondition(InitialMode.BERNOULLI, p=-0.1)

    def test_equilibrium_density_is_high_at_lambda_four(self):
        window = Window.around_origin(40, 1.0)
        interval = equilibrium_density(self.params, 4, window, 5.0, seed=1)
        self.assertTrue(0.5 < interval.estimate < 1.0)

    def test_iota_estimate(self):
        estimate, records = estimate_iota(self.params, 30, 5.0, seed=2)
        self.assertEqual(len(records), 30)
        self.assertGreaterEqual(estimate.survivors, 2)
        self.assertTrue(0.0 < estimate.iota < self.params.cone_speed)
        summary = estimate.to_summary(self.params.lam)
        self.assertEqual(summary["replicas"], 30)

    def test_iota_without_infection_has_no_survivors(self):
        with self.assertLogs("contactwalk.contact", level="WARNING"):
            with self.assertRaises(InsufficientDataError) as ctx:
                estimate_iota(self.params.with_lambda(0.0), 3, 20.0, seed=0)
        self.assertIn("at least 2 surviving clusters", str(ctx.exception))
        self.assertEqual(ctx.exception.counts["survivors"], 0)

    def test_iota_warns_below_reference_critical_value(self):
        with self.assertLogs("contactwalk.contact", level="WARNING"):
            try:
                estimate_iota(self.params.with_lambda(1.0), 4, 2.0, seed=0)
            except InsufficientDataError:
                pass


if __name__ == '__main__':
    unittest.main()
