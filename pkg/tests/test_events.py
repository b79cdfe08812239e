import tempfile
import unittest
from pathlib import Path

import numpy as np

from contactwalk.enums import EventKind
from contactwalk.errors import CapacityError
from contactwalk.events import (
    EventLog,
    expected_event_count,
    merged_event_iterator,
    sample_event_log,
)
from contactwalk.params import ModelParams, Window
from contactwalk.rng import RngStreams


class TestHandBuiltLog(unittest.TestCase):

    def setUp(self):
        self.window = Window.around_origin(3, 5.0)
        self.log = EventLog.from_event_lists(
            self.window,
            2.0,
            crosses={0: [1.0, 3.0], 2: [2.0]},
            arrows={-1: [1.0, 4.0], 2: [0.5]},
        )

    def test_accessors(self):
        np.testing.assert_array_equal(self.log.crosses_at(0), [1.0, 3.0])
        np.testing.assert_array_equal(self.log.crosses_at(-3), [])
        np.testing.assert_array_equal(self.log.arrows_on(-1), [1.0, 4.0])
        self.assertEqual(self.log.event_count, 6)
        with self.assertRaises(ValueError):
            self.log.arrows_on(3)

    def test_merged_order_puts_crosses_first_on_ties(self):
        events = list(merged_event_iterator(self.log))
        self.assertEqual(
            events,
            [
                (0.5, EventKind.ARROW, 2),
                (1.0, EventKind.CROSS, 0),
                (1.0, EventKind.ARROW, -1),
                (2.0, EventKind.CROSS, 2),
                (3.0, EventKind.CROSS, 0),
                (4.0, EventKind.ARROW, -1),
            ],
        )

    def test_first_after_excludes_the_start_time(self):
        merged = self.log.merged
        self.assertEqual(merged.first_after(0.0), 0)
        self.assertEqual(merged.first_after(1.0), 3)
        self.assertEqual(merged.last_until(3.0), 5)

    def test_rejects_bad_times(self):
        with self.assertRaisesRegex(ValueError, "must lie in"):
            EventLog.from_event_lists(self.window, 1.0, {0: [6.0]}, {})
        with self.assertRaisesRegex(ValueError, "strictly increasing"):
            EventLog.from_event_lists(self.window, 1.0, {0: [1.0, 1.0]}, {})
        with self.assertRaisesRegex(ValueError, "outside the window"):
            EventLog.from_event_lists(self.window, 1.0, {}, {3: [1.0]})

    def test_equal_times_on_different_sites_are_fine(self):
        log = EventLog.from_event_lists(self.window, 1.0, {0: [1.0], 1: [1.0]}, {0: [1.0]})
        self.assertEqual(log.event_count, 3)

    def test_dump_and_load_preserve_digest(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "log.bin"
            self.log.dump(path)
            loaded = EventLog.load(path)
        self.assertEqual(loaded.digest(), self.log.digest())
        self.assertEqual(loaded.window, self.window)

    def test_load_rejects_other_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "junk.bin"
            path.write_bytes(b"nope" + bytes(40))
            with self.assertRaisesRegex(ValueError, "not an event log dump"):
                EventLog.load(path)


class TestSampling(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(2.0, 0.25, 0.75, 0.75, 0.25)
        self.window = Window.around_origin(20, 4.0)
        self.streams = RngStreams(5)

    def test_same_stream_same_log(self):
        a = sample_event_log(self.params, self.window, self.streams.env(0))
        b = sample_event_log(self.params, self.window, self.streams.env(0))
        self.assertEqual(a.digest(), b.digest())
        self.assertEqual(a.stream_id, self.streams.env(0).key)
        c = sample_event_log(self.params, self.window, self.streams.env(1))
        self.assertNotEqual(a.digest(), c.digest())

    def test_event_counts_match_rates(self):
        log = sample_event_log(self.params, self.window, self.streams.env(2))
        expected = expected_event_count(self.params, self.window)
        self.assertLess(abs(log.event_count - expected), 5 * np.sqrt(expected))
        for x in range(-20, 20):
            arrows = log.arrows_on(x)
            self.assertTrue(np.all(np.diff(arrows) > 0))
            self.assertTrue(np.all((arrows >= 0) & (arrows <= 4.0)))

    def test_capacity_error_suggests_smaller_horizon(self):
        with self.assertRaises(CapacityError) as cm:
            sample_event_log(self.params, self.window, self.streams.env(0), max_events=10)
        self.assertLess(cm.exception.suggested_horizon, self.window.horizon)


if __name__ == '__main__':
    unittest.main()
