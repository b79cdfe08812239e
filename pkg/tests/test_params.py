import math
import unittest

from contactwalk.errors import CapacityError, ConfigParseError, InsufficientDataError, InvariantViolation
from contactwalk.params import ModelParams, Window


class TestModelParams(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(4.0, 0.25, 0.75, 0.75, 0.25)

    def test_derived_quantities(self):
        p = self.params
        self.assertEqual(p.gamma, 1.0)
        self.assertEqual(p.v0, -0.5)
        self.assertEqual(p.v1, 0.5)
        self.assertEqual(p.max_drift, 0.5)
        self.assertEqual(p.right_probability(0), 0.25)
        self.assertEqual(p.right_probability(1), 0.75)
        self.assertEqual(p.cone_speed, 13.0)
        self.assertEqual(p.reach(2.5), 33)

    def test_rate_totals_must_agree(self):
        with self.assertRaisesRegex(ValueError, "must agree"):
            ModelParams(1.0, 0.25, 0.5, 0.5, 0.5)

    def test_zero_rates_need_opt_in(self):
        with self.assertRaisesRegex(ValueError, "strictly positive"):
            ModelParams(1.0, 0.0, 1.0, 0.5, 0.5)
        p = ModelParams(1.0, 0.0, 1.0, 0.5, 0.5, allow_zero_rates=True)
        self.assertEqual(p.v0, -1.0)

    def test_invalid_numbers(self):
        with self.assertRaisesRegex(ValueError, "finite and non-negative"):
            ModelParams(-1.0, 0.5, 0.5, 0.5, 0.5)
        with self.assertRaisesRegex(ValueError, "finite and non-negative"):
            ModelParams(float("nan"), 0.5, 0.5, 0.5, 0.5)
        with self.assertRaisesRegex(ValueError, "must be a number"):
            ModelParams(True, 0.5, 0.5, 0.5, 0.5)

    def test_zero_lambda_is_allowed(self):
        self.assertEqual(ModelParams(0, 0.5, 0.5, 0.5, 0.5).lam, 0)

    def test_from_drift_split(self):
        p = ModelParams.from_drift_split(4.0, 2.0, 0.25, 0.75)
        self.assertEqual((p.alpha0, p.beta0, p.alpha1, p.beta1), (0.5, 1.5, 1.5, 0.5))

    def test_swapped_and_homogeneous(self):
        swapped = self.params.swapped()
        self.assertEqual(swapped.v0, -self.params.v0)
        self.assertEqual(swapped.v1, -self.params.v1)
        infected = self.params.homogeneous(1)
        self.assertEqual(infected.v0, self.params.v1)
        self.assertEqual(infected.v1, self.params.v1)
        self.assertEqual(self.params.with_lambda(2.0).lam, 2.0)

    def test_to_dict_uses_lambda_key(self):
        d = self.params.to_dict()
        self.assertEqual(d["lambda"], 4.0)
        self.assertEqual(d["v1"], 0.5)
        self.assertNotIn("lam", d)


class TestWindow(unittest.TestCase):

    def test_for_horizon_covers_light_cone(self):
        params = ModelParams(4.0, 0.25, 0.75, 0.75, 0.25)
        window = Window.for_horizon(params, 2.5)
        self.assertEqual((window.x_min, window.x_max), (-33, 33))
        self.assertEqual(window.n_sites, 67)
        self.assertEqual(window.n_bonds, 66)
        self.assertGreaterEqual(window.half_width, params.cone_speed * 2.5)
        self.assertEqual(Window.for_horizon(params, 2.5, min_half_width=50).half_width, 50)

    def test_validation(self):
        with self.assertRaises(ValueError):
            Window(0, 0, 1.0)
        with self.assertRaises(ValueError):
            Window(-1, 1, 0.0)
        with self.assertRaises(ValueError):
            Window(-1, 1, math.inf)
        with self.assertRaises(ValueError):
            Window(-1.0, 1, 1.0)

    def test_indexing_and_boundary(self):
        window = Window.around_origin(10, 1.0)
        self.assertEqual(window.index(-10), 0)
        self.assertEqual(window.site(20), 10)
        with self.assertRaisesRegex(ValueError, "outside the window"):
            window.index(11)
        self.assertTrue(window.near_boundary(-8))
        self.assertFalse(window.near_boundary(-7))
        self.assertTrue(window.near_boundary(8))
        self.assertEqual(window.with_horizon(3).horizon, 3.0)


class TestErrors(unittest.TestCase):

    def test_exit_codes(self):
        self.assertEqual(ConfigParseError("x").exit_code, 1)
        self.assertEqual(CapacityError("x").exit_code, 2)
        self.assertEqual(InvariantViolation("x").exit_code, 3)
        self.assertEqual(InsufficientDataError("x").exit_code, 4)
        self.assertIsInstance(ConfigParseError("x"), ValueError)

    def test_capacity_error_suggests_horizon(self):
        err = CapacityError("Too many events.", 12.5)
        self.assertEqual(err.suggested_horizon, 12.5)
        self.assertIn("Try a horizon of at most 12.5.", str(err))

    def test_insufficient_data_lists_counts(self):
        err = InsufficientDataError("Too few.", {"replicas": 3, "usable": 1})
        self.assertEqual(err.counts, {"replicas": 3, "usable": 1})
        self.assertIn("(replicas=3, usable=1)", str(err))


if __name__ == '__main__':
    unittest.main()
