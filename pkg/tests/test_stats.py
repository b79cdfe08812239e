import math
import unittest

import numpy as np

from contactwalk.contact import InitialCondition
from contactwalk.enums import EstimatorMethod, InitialMode
from contactwalk.errors import InsufficientDataError
from contactwalk.intervals import Interval
from contactwalk.params import ModelParams
from contactwalk.stats import (
    _regen_ratios,
    SigmaEstimate,
    batch_means_sigma,
    clt_diagnostic,
    cramer_rate,
    estimate_speed_lln,
    estimate_speed_subadditive,
    exponential_tail_fit,
    geometric_fit,
    halves_ks_pvalue,
    homogeneous_exceedance_log_probability,
    ldp_decay,
    subadditive_stationarity,
    subadditive_triple,
)

# the same rates on healthy and infected sites: W_t is a difference of Poisson counts
HOMOGENEOUS = ModelParams(1.0, 0.75, 0.25, 0.75, 0.25)
FULL = InitialCondition(InitialMode.FULL)


class TestRateFunctions(unittest.TestCase):

    def test_cramer_rate_vanishes_at_the_drift(self):
        self.assertAlmostEqual(cramer_rate(0.75, 0.25, 0.5), 0.0, places=12)
        self.assertGreater(cramer_rate(0.75, 0.25, 0.9), 0.0)
        self.assertGreater(cramer_rate(0.75, 0.25, 0.1), 0.0)

    def test_exact_exceedance_approaches_cramer(self):
        t = 2000.0
        exact = homogeneous_exceedance_log_probability(0.75, 0.25, t, 0.5, 0.2) / t
        cramer = -min(cramer_rate(0.75, 0.25, 0.7), cramer_rate(0.75, 0.25, 0.3))
        self.assertLess(exact, 0.0)
        self.assertLess(abs(exact - cramer), 0.01)

    def test_exact_exceedance_is_a_probability(self):
        for t in (5.0, 50.0):
            logp = homogeneous_exceedance_log_probability(0.75, 0.25, t, 0.5, 0.3)
            self.assertLessEqual(logp, 1e-12)


class TestFits(unittest.TestCase):

    def test_geometric_fit(self):
        samples = np.random.default_rng(0).geometric(0.4, 2000)
        statistic, p_value = geometric_fit(samples, 1.0 / samples.mean())
        self.assertTrue(math.isfinite(statistic))
        self.assertGreater(p_value, 0.001)

    def test_geometric_fit_edge_cases(self):
        self.assertEqual(geometric_fit([1, 1, 1], 1.0), (0.0, 1.0))
        self.assertEqual(geometric_fit([1, 2], 1.0), (math.inf, 0.0))
        self.assertTrue(all(math.isnan(v) for v in geometric_fit([], 0.5)))

    def test_exponential_tail_fit(self):
        samples = np.random.default_rng(1).exponential(0.5, 2000)
        slope, r2 = exponential_tail_fit(samples)
        self.assertLess(abs(slope + 2.0), 0.5)
        self.assertGreater(r2, 0.9)
        self.assertTrue(math.isnan(exponential_tail_fit([1.0, 2.0])[0]))

    def test_regeneration_ratios(self):
        w = np.array([1.0, 3.0, 2.0, 6.0])
        tau = np.array([1.0, 2.0, 1.0, 4.0])
        speed, variance, moment_form = _regen_ratios(w, tau)
        self.assertAlmostEqual(speed.estimate, 1.5)
        # mean of (w - 1.5 tau)^2 = 0.125 over mean tau = 2
        self.assertAlmostEqual(variance.estimate, 0.0625)
        # (E[w^2] - E[w]^2) / E[tau] = (12.5 - 9) / 2
        self.assertAlmostEqual(moment_form, 1.75)

    def test_halves_ks_pvalue(self):
        self.assertAlmostEqual(halves_ks_pvalue([1.0, 2.0, 3.0, 1.0, 2.0, 3.0]), 1.0)
        self.assertLess(halves_ks_pvalue(list(range(20)) + list(range(100, 120))), 1e-6)
        self.assertTrue(math.isnan(halves_ks_pvalue([1.0, 2.0, 3.0])))

    def test_sigma_from_negative_variance_bound(self):
        sigma = SigmaEstimate.from_variance(Interval(0.25, 0.2, -0.1, 0.6, 10, "normal"), EstimatorMethod.BATCH_MEANS)
        self.assertEqual(sigma.sigma, 0.5)
        self.assertEqual(sigma.lower, 0.0)


class TestSpeedEstimators(unittest.TestCase):

    def test_lln_recovers_homogeneous_drift(self):
        estimate, records = estimate_speed_lln(HOMOGENEOUS, FULL, 200, 10.0, seed=0)
        self.assertEqual(len(records), 200)
        self.assertEqual(estimate.method, EstimatorMethod.LLN)
        self.assertLess(abs(estimate.v_hat - 0.5), 4.0 * estimate.se)
        self.assertEqual(estimate.to_summary()["method"], "lln")

    def test_lln_is_reproducible(self):
        a, _ = estimate_speed_lln(HOMOGENEOUS, FULL, 5, 4.0, seed=11)
        b, _ = estimate_speed_lln(HOMOGENEOUS, FULL, 5, 4.0, seed=11)
        self.assertEqual(a.v_hat, b.v_hat)

    def test_single_replica_is_not_enough(self):
        with self.assertRaises(InsufficientDataError):
            estimate_speed_lln(HOMOGENEOUS, FULL, 1, 4.0, seed=0)

    def test_subadditive_triples_hold(self):
        params = ModelParams(2.0, 0.25, 0.75, 0.75, 0.25)
        for replica in range(5):
            triple = subadditive_triple(params, 3, 6, seed=0, replica=replica)
            if not triple.contaminated:
                self.assertTrue(triple.holds)
        with self.assertRaises(ValueError):
            subadditive_triple(params, 4, 3, seed=0)

    def test_subadditive_grid(self):
        params = ModelParams(2.0, 0.25, 0.75, 0.75, 0.25)
        estimate, _ = estimate_speed_subadditive(params, [2, 4], 10, seed=0)
        self.assertEqual([row["n"] for row in estimate.details["grid"]], [2, 4])
        with self.assertRaises(ValueError):
            estimate_speed_subadditive(params, [0, 4], 10, seed=0)

    def test_stationarity_check(self):
        params = ModelParams(2.0, 0.25, 0.75, 0.75, 0.25)
        check, records = subadditive_stationarity(params, 2, 2, 20, seed=0)
        self.assertEqual(len(records), 20)
        self.assertTrue(0.0 <= check.pvalue <= 1.0)
        self.assertEqual(check.to_summary()["k"], 2)
        with self.assertRaises(ValueError):
            subadditive_stationarity(params, 2, 0, 20, seed=0)


class TestVolatilityAndDiagnostics(unittest.TestCase):

    def test_batch_means_on_homogeneous_walk(self):
        sigma = batch_means_sigma(HOMOGENEOUS, 40.0, 10, 50, seed=0, initial=FULL)
        # sigma^2 equals the total jump rate
        self.assertLess(abs(sigma.sigma - 1.0), 0.2)
        with self.assertRaises(ValueError):
            batch_means_sigma(HOMOGENEOUS, 40.0, 1, 50, seed=0, initial=FULL)

    def test_clt_diagnostic(self):
        report = clt_diagnostic(HOMOGENEOUS, 100, 20.0, 0.5, 1.0, seed=0, initial=FULL)
        self.assertEqual(report.replicas, 100)
        self.assertLess(abs(report.increment_correlation), 0.5)
        self.assertAlmostEqual(report.correlation_threshold, 0.3)
        with self.assertRaises(ValueError):
            clt_diagnostic(HOMOGENEOUS, 100, 20.0, 0.5, 0.0, seed=0)

    def test_ldp_rows_carry_oracles_for_homogeneous_walks(self):
        report = ldp_decay(HOMOGENEOUS, 0.3, [10.0, 5.0], 100, 0.5, seed=0, initial=FULL)
        self.assertEqual([row.t for row in report.rows], [5.0, 10.0])
        for row in report.rows:
            self.assertLess(row.rate, 0.0)
            self.assertLess(row.exact_rate, 0.0)
            self.assertLess(row.cramer_rate, 0.0)
            self.assertEqual(row.upper_bound, row.exceedances < 5)
        self.assertTrue(report.negative)
        with self.assertRaises(ValueError):
            ldp_decay(HOMOGENEOUS, 0.0, [5.0], 100, 0.5, seed=0)


if __name__ == '__main__':
    unittest.main()
