import unittest
from unittest.mock import Mock, patch

from contactwalk.decorators import invariant_check


class TestInvariantCheckDecorator(unittest.TestCase):

    def test_passing_check(self):
        mock_check_logic = Mock(return_value={"status": "passed", "details": "OK", "trials": 5, "violations": 0})

        @invariant_check(check_name="test_pass")
        def decorated_check(self_param):
            return mock_check_logic()

        result = decorated_check(None)

        self.assertEqual(result['check'], "test_pass")
        self.assertEqual(result['status'], "passed")
        self.assertEqual(result['details'], "OK")
        self.assertEqual(result['trials'], 5)
        self.assertEqual(result['violations'], 0)
        self.assertIsInstance(result['duration_sec'], float)
        self.assertGreaterEqual(result['duration_sec'], 0)
        mock_check_logic.assert_called_once()

    def test_failing_check_keeps_counts(self):
        mock_check_logic = Mock(return_value={"status": "failed", "details": "2 of 5 broke", "trials": 5, "violations": 2})

        @invariant_check(check_name="test_fail")
        def decorated_check(self_param):
            return mock_check_logic()

        result = decorated_check(None)

        self.assertEqual(result['status'], "failed")
        self.assertEqual(result['details'], "2 of 5 broke")
        self.assertEqual(result['violations'], 2)

    def test_missing_fields_default(self):
        @invariant_check(check_name="test_sparse")
        def decorated_check(self_param):
            return {}

        result = decorated_check(None)

        self.assertEqual(result['status'], "failed")
        self.assertEqual(result['details'], "Check function did not provide details.")
        self.assertEqual(result['trials'], 0)

    def test_exception_becomes_error(self):
        mock_check_logic = Mock(side_effect=ValueError("Test Exception"))

        @invariant_check(check_name="test_exception")
        def decorated_check(self_param):
            return mock_check_logic()

        with self.assertLogs("contactwalk.decorators", level="ERROR"):
            result = decorated_check(None)

        self.assertEqual(result['status'], "error")
        self.assertIn("ValueError", result['details'])
        self.assertIn("Test Exception", result['details'])
        self.assertEqual(result['trials'], 0)

    def test_unknown_status_becomes_error(self):
        @invariant_check(check_name="test_unknown_status")
        def decorated_check(self_param):
            return {"status": "sideways"}

        with self.assertLogs("contactwalk.decorators", level="ERROR"):
            result = decorated_check(None)

        self.assertEqual(result['status'], "error")

    @patch('contactwalk.decorators.time.perf_counter', side_effect=[10.0, 12.5])
    def test_duration_is_measured(self, mock_perf_counter):
        @invariant_check(check_name="test_duration")
        def decorated_check(self_param):
            return {"status": "passed"}

        result = decorated_check(None)

        self.assertEqual(result['duration_sec'], 2.5)
        self.assertEqual(mock_perf_counter.call_count, 2)

    def test_wraps_keeps_name(self):
        @invariant_check(check_name="test_name")
        def some_check(self_param):
            return {"status": "passed"}

        self.assertEqual(some_check.__name__, "some_check")


if __name__ == '__main__':
    unittest.main()
