import math
import unittest

import numpy as np

from contactwalk import kernels
from contactwalk.contact import InitialCondition
from contactwalk.enums import InitialMode
from contactwalk.events import EventLog
from contactwalk.experiments import (
    SweepSettings,
    coupling_experiment,
    default_cone_slope,
    house_tips,
    sweep,
)
from contactwalk.params import ModelParams, Window

PARAMS = ModelParams(4.0, 0.25, 0.75, 0.75, 0.25)


class TestConeHelpers(unittest.TestCase):

    def test_default_cone_slope(self):
        self.assertEqual(default_cone_slope(PARAMS, 2.5), 1.5)

    def test_house_tips(self):
        np.testing.assert_array_equal(house_tips([0, 4, 10], 2.0), [[2.0, 3.0], [7.0, 4.0]])
        self.assertEqual(house_tips([3], 2.0).shape, (0, 2))


class TestCouplingScan(unittest.TestCase):

    def scan(self, upper, crosses, t_end):
        window = Window.around_origin(6, 11.0)
        merged = EventLog.from_event_lists(window, 1.0, crosses, {}).merged
        return kernels.coupling_scan(
            np.zeros(window.n_sites, dtype=np.uint8),
            upper,
            merged.times,
            merged.kinds,
            merged.sites,
            t_end,
            window.index(0),
            1.0,
            np.empty(0, dtype=np.int64),
            1.0,
        )

    def test_disagreement_open_at_the_end_is_infinite(self):
        last_bad, violations, intervals = self.scan(np.ones(13, dtype=np.uint8), {}, 2.0)
        self.assertTrue(math.isinf(last_bad))
        self.assertEqual(violations, 0)
        self.assertEqual(intervals, 13)

    def test_disagreement_closed_by_a_cross(self):
        upper = np.zeros(13, dtype=np.uint8)
        upper[6] = 1
        last_bad, _, intervals = self.scan(upper, {0: [1.0]}, 2.0)
        self.assertEqual(last_bad, 1.0)
        self.assertEqual(intervals, 1)


class TestCouplingExperiment(unittest.TestCase):

    def test_full_start_never_disagrees(self):
        report, records = coupling_experiment(
            PARAMS, InitialCondition(InitialMode.FULL), None, [1.0, 2.0], 3, seed=0, iota_hat=2.0
        )
        self.assertEqual(len(records), 3)
        self.assertEqual(report.disagreement, [0.0, 0.0])
        self.assertEqual(report.safe_violations, 0)
        self.assertEqual(report.slope, 1.25)

    def test_bernoulli_start(self):
        report, _ = coupling_experiment(
            PARAMS, InitialCondition(InitialMode.BERNOULLI, p=0.5), 1.0, [4.0, 2.0], 4, seed=1, iota_hat=2.0
        )
        self.assertEqual(report.t_grid, [2.0, 4.0])
        self.assertTrue(report.non_increasing)
        self.assertEqual(report.safe_violations, 0)
        summary = report.to_summary(PARAMS.lam)
        self.assertEqual(summary["method"], "cone-coupling")
        self.assertEqual(summary["flags"], [])

    def test_open_disagreement_counts_at_the_horizon(self):
        # an empty lower start never catches up with the all-ones upper one
        report, records = coupling_experiment(
            PARAMS, InitialCondition(InitialMode.BERNOULLI, p=0.0), 10.0, [0.0, 1.0], 5, seed=2, iota_hat=2.0
        )
        self.assertEqual(report.disagreement, [1.0, 1.0])
        self.assertTrue(all(math.isinf(r["last_bad_time"]) for r in records))
        self.assertEqual(report.safe_violations, 0)

    def test_rejects_empty_start_and_grid(self):
        with self.assertRaises(ValueError):
            coupling_experiment(PARAMS, InitialCondition(InitialMode.EMPTY), 1.0, [1.0], 2, seed=0, iota_hat=2.0)
        with self.assertRaises(ValueError):
            coupling_experiment(PARAMS, InitialCondition(InitialMode.FULL), 1.0, [], 2, seed=0, iota_hat=2.0)


class TestSweep(unittest.TestCase):

    def test_small_sweep(self):
        settings = SweepSettings(
            horizon=2.0,
            replicas=4,
            seed=0,
            initial=InitialCondition(InitialMode.FULL, burn_in=2.0),
            iota_horizon=2.0,
            density_replicas=2,
        )
        result = sweep(PARAMS, [4.0, 3.0], settings)
        self.assertEqual([p.lam for p in result.points], [3.0, 4.0])
        summary = result.to_summary()
        self.assertEqual(summary["v0"], -0.5)
        self.assertEqual(summary["v1"], 0.5)
        self.assertEqual(len(summary["points"]), 2)
        for point in result.points:
            self.assertTrue(0.0 < point.rho.estimate <= 1.0)

    def test_empty_grid(self):
        with self.assertRaises(ValueError):
            sweep(PARAMS, [], SweepSettings(horizon=2.0, replicas=4, seed=0))


if __name__ == '__main__':
    unittest.main()
