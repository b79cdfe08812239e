import json
import math
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from contactwalk.report import (
    REPLICA_FILE,
    SUMMARY_FILE,
    generate_invariant_report,
    generate_summary_report,
    json_safe,
    records_to_dataframe,
    summary_json,
    write_artifacts,
)


class TestRecords(unittest.TestCase):

    def test_dataframe_layout(self):
        records = [
            {"positions": [3, 5], "cycles": [[1.5, 2]], "replica": 0, "contaminated": False},
            {"positions": None, "cycles": [], "replica": 1, "contaminated": True},
        ]
        df = records_to_dataframe(records)
        self.assertEqual(list(df.columns)[0], "replica")
        self.assertEqual(df.loc[0, "positions"], "3;5")
        self.assertEqual(df.loc[0, "cycles"], "[[1.5, 2]]")
        self.assertTrue(pd.isna(df.loc[1, "positions"]))
        self.assertTrue(records_to_dataframe([]).empty)

    def test_json_safe(self):
        cleaned = json_safe({"a": math.nan, "b": [math.inf, -math.inf, 1.5], 3: (1, None)})
        self.assertEqual(cleaned, {"a": None, "b": ["inf", "-inf", 1.5], "3": [1, None]})


class TestArtifacts(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.test_dir.cleanup)

    def test_summary_json_is_stable(self):
        summary = {"v_hat": 0.25, "se": math.nan, "method": "lln"}
        first = summary_json(summary, {"run": {"seed": 1}})
        second = summary_json(dict(reversed(list(summary.items()))), {"run": {"seed": 1}})
        self.assertEqual(first, second)
        payload = json.loads(first)
        self.assertIsNone(payload["se"])
        self.assertEqual(payload["config"], {"run": {"seed": 1}})

    def test_write_artifacts(self):
        out = Path(self.test_dir.name) / "nested" / "run"
        written = write_artifacts(out, {"method": "lln"}, {}, [{"replica": 0, "x": 1}])
        self.assertEqual(written, [out / SUMMARY_FILE, out / REPLICA_FILE])
        self.assertEqual(pd.read_csv(out / REPLICA_FILE)["x"].tolist(), [1])

    def test_no_csv_without_records(self):
        out = Path(self.test_dir.name)
        written = write_artifacts(out, {"method": "clt"}, {}, [])
        self.assertEqual(written, [out / SUMMARY_FILE])
        written = write_artifacts(out, {"method": "clt"}, {}, [{"replica": 0}], write_csv=False)
        self.assertEqual(written, [out / SUMMARY_FILE])


class TestTextReports(unittest.TestCase):

    def test_summary_report(self):
        summary = {
            "epsilon": 0.1,
            "censoring": {"horizon": 50.0},
            "rows": [{"t": 10.0, "rate": -0.05, "upper_bound": True}, {"t": 20.0, "rate": -0.04, "upper_bound": False}],
        }
        report = generate_summary_report("ldp", summary)
        self.assertIn("--- ldp summary ---", report)
        self.assertIn("epsilon: 0.1", report)
        self.assertIn("  horizon: 50", report)
        self.assertIn("t=10: rate=-0.05 (upper bound)", report)
        self.assertIn("t=20: rate=-0.04\n", report + "\n")
        self.assertNotIn("rows:", report)

    def test_invariant_report(self):
        results = [
            {"check": "walk_bound", "status": "passed", "details": "ok", "trials": 10, "violations": 0},
            {"check": "subadditivity", "status": "failed", "details": "trial 3", "trials": 10, "violations": 1},
        ]
        report = generate_invariant_report(results)
        self.assertIn("walk_bound: passed (10/10 trials passed)", report)
        self.assertIn("subadditivity: failed (9/10 trials passed)", report)
        self.assertIn("    trial 3", report)
        self.assertIn("Checks Passed: 1", report)
        self.assertIn("Checks Failed (or Errored): 1", report)
        self.assertIn("Total Trials: 20", report)


if __name__ == '__main__':
    unittest.main()
