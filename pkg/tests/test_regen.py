import math
import unittest

import numpy as np

from contactwalk.contact import Configuration, evolve_trajectory
from contactwalk.enums import FailureStatus
from contactwalk.events import EventLog
from contactwalk.params import ModelParams, Window
from contactwalk.regen import (
    RegenSettings,
    estimate_gamma_event,
    failure_time,
    left_tracer,
    regeneration_cycles,
    regeneration_scan,
    scans_to_dataframe,
    trial_time,
    wave_hitting,
)
from contactwalk.walker import WalkDriver, build_walk
from tests.test_contact import small_log

PARAMS = ModelParams(1.0, 0.25, 0.75, 0.75, 0.25)


def frozen_walk(traj, start):
    return build_walk(traj, PARAMS, WalkDriver.frozen(traj.horizon), start)


class TestLeftTracer(unittest.TestCase):

    def setUp(self):
        arrows = {
            -3: [2.0, 7.0],
            -2: [3.5, 9.5],
            -1: [5.0, 8.5],
            0: [1.7, 6.5, 10.0],
            1: [2.5, 8.0],
            2: [5.5],
        }
        self.log = EventLog.from_event_lists(Window.around_origin(6, 11.0), 1.0, {}, arrows)

    def test_path_from_two(self):
        tracer = left_tracer(self.log, 2, 0.0)
        np.testing.assert_array_equal(tracer.step_times, [2.5, 6.5, 8.5, 9.5])
        self.assertEqual(tracer.position_at(2.4), 2)
        self.assertEqual(tracer.position_at(2.5), 1)
        self.assertEqual(tracer.position_at(9.0), -1)
        self.assertEqual(tracer.position_at(11.0), -2)
        self.assertFalse(tracer.contaminated)

    def test_later_start_ignores_earlier_arrows(self):
        tracer = left_tracer(self.log, 2, 3.0)
        np.testing.assert_array_equal(tracer.step_times, [8.0, 10.0])
        self.assertEqual(tracer.position_at(11.0), 0)

    def test_tracer_near_wall_is_contaminated(self):
        self.assertTrue(left_tracer(self.log, 5, 0.0).contaminated)


class TestWaveHitting(unittest.TestCase):

    def setUp(self):
        self.log = small_log()
        self.full = evolve_trajectory(Configuration.full(self.log.window), self.log)

    def test_walker_on_the_edge(self):
        hit = wave_hitting(self.log, self.full, frozen_walk(self.full, 1), 0.0, 2)
        self.assertEqual(hit.time, 0.0)
        self.assertFalse(hit.censored)

    def test_edge_reaches_walker(self):
        hit = wave_hitting(self.log, self.full, frozen_walk(self.full, 2), 0.0, 2)
        self.assertEqual(hit.time, 6.0)

    def test_start_right_of_neighbour(self):
        with self.assertRaises(ValueError):
            wave_hitting(self.log, self.full, frozen_walk(self.full, 0), 0.0, 3)

    def test_dying_wave_is_censored(self):
        dying = evolve_trajectory(Configuration.single(self.log.window, 2), self.log)
        hit = wave_hitting(self.log, dying, frozen_walk(dying, 3), 0.0, 3)
        self.assertTrue(hit.died)
        self.assertTrue(hit.censored)
        self.assertEqual(hit.time, math.inf)


class TestFailureAndTrials(unittest.TestCase):

    def setUp(self):
        self.log = small_log()
        self.full = evolve_trajectory(Configuration.full(self.log.window), self.log)

    def test_failure_statuses(self):
        dies = failure_time(self.log, frozen_walk(self.full, 2), 0.0, 5.0)
        self.assertEqual(dies.status, FailureStatus.FAILED)
        self.assertEqual(dies.time, 3.26)
        lives = failure_time(self.log, frozen_walk(self.full, 0), 0.0, 3.0)
        self.assertEqual(lives.status, FailureStatus.CONFIRMED)
        self.assertEqual(lives.time, math.inf)
        open_ended = failure_time(self.log, frozen_walk(self.full, 0), 0.0, 20.0)
        self.assertEqual(open_ended.status, FailureStatus.UNCONFIRMED)

    def test_trial_after_failure(self):
        trial = trial_time(self.log, self.full, frozen_walk(self.full, 2), 0.0, 5.0)
        self.assertTrue(trial.failure.failed)
        self.assertEqual(trial.tracer_site, 2)
        self.assertEqual(trial.time, 6.0)
        self.assertFalse(trial.infinite)
        self.assertFalse(trial.censored)

    def test_infinite_trial(self):
        trial = trial_time(self.log, self.full, frozen_walk(self.full, 2), 6.0, 3.0)
        self.assertTrue(trial.infinite)
        self.assertEqual(trial.time, math.inf)
        self.assertIsNone(trial.hitting)


class TestRegenerationScan(unittest.TestCase):

    def setUp(self):
        self.log = small_log()
        self.full = evolve_trajectory(Configuration.full(self.log.window), self.log)
        self.path = frozen_walk(self.full, 2)

    def test_scan_regenerates_at_first_trial(self):
        scan = regeneration_scan(self.log, self.full, self.path, RegenSettings(3.0))
        self.assertTrue(scan.complete)
        self.assertEqual(scan.trial_times, [6.0])
        self.assertEqual(scan.K, 1)
        self.assertEqual(scan.tau, 6.0)
        self.assertEqual(scan.w_tau, 2)
        self.assertFalse(scan.contaminated)

    def test_scan_stops_at_horizon(self):
        scan = regeneration_scan(self.log, self.full, self.path, RegenSettings(20.0))
        self.assertFalse(scan.complete)
        self.assertIsNone(scan.K)
        self.assertIn("horizon", scan.reason)

    def test_cycles(self):
        cycles = regeneration_cycles(self.log, self.full, self.path, RegenSettings(3.0))
        self.assertEqual(cycles, [(6.0, 0)])

    def test_scan_rows(self):
        scan = regeneration_scan(self.log, self.full, self.path, RegenSettings(3.0))
        df = scans_to_dataframe([(7, scan)])
        self.assertEqual(len(df), 1)
        row = df.iloc[0]
        self.assertEqual(row["replica"], 7)
        self.assertEqual(row["failure_status"], "confirmed")
        self.assertEqual(row["tau"], 6.0)


class TestSettingsAndGammaEvent(unittest.TestCase):

    def test_settings(self):
        self.assertEqual(RegenSettings.for_params(PARAMS).confirm_window, 30.0)
        self.assertEqual(RegenSettings.for_params(PARAMS, 5.0).confirm_window, 5.0)
        with self.assertRaises(ValueError):
            RegenSettings(0.0)
        with self.assertRaises(ValueError):
            RegenSettings(1.0, max_trials=0)

    def test_gamma_event_smoke(self):
        params = ModelParams(4.0, 0.25, 0.75, 0.75, 0.25)
        estimate, records = estimate_gamma_event(params, 20, RegenSettings(2.0), seed=3, burn_in=2.0)
        self.assertEqual(len(records), 20)
        self.assertTrue(0.0 <= estimate.kappa.estimate <= 1.0)
        self.assertGreater(estimate.rho.estimate, 0.0)
        self.assertLessEqual(estimate.p_gamma.estimate, estimate.rho.estimate)
        summary = estimate.to_summary(4.0)
        self.assertEqual(summary["method"], "gamma-event")


if __name__ == '__main__':
    unittest.main()
