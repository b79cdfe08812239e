"""Graphical representation: Poisson crosses per site and arrows per bond."""

import hashlib
import logging
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Sequence, Tuple, Union

import numpy as np

from .enums import EventKind
from .errors import CapacityError
from .params import ModelParams, Window
from .rng import Substream

logger = logging.getLogger(__name__)

DEFAULT_MAX_EVENTS = 50_000_000

DUMP_MAGIC = b"CWEL"
DUMP_VERSION = 1


@dataclass(frozen=True)
class MergedEvents:
    """All events of a log in (time, kind, site) order; sites are window indices."""

    times: np.ndarray
    kinds: np.ndarray
    sites: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    def first_after(self, t0: float) -> int:
        return int(np.searchsorted(self.times, t0, side="right"))

    def last_until(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right"))


@dataclass(frozen=True, eq=False)
class EventLog:
    """Crosses (heals) per site and arrows per bond (x, x+1), stored CSR-style.

    The times of site i are ``cross_times[cross_offsets[i]:cross_offsets[i+1]]``
    and similarly for bonds, each run strictly increasing.
    """

    window: Window
    lam: float
    cross_times: np.ndarray
    cross_offsets: np.ndarray
    arrow_times: np.ndarray
    arrow_offsets: np.ndarray
    stream_id: Tuple[int, ...] = ()

    @classmethod
    def from_event_lists(
        cls,
        window: Window,
        lam: float,
        crosses: Mapping[int, Sequence[float]],
        arrows: Mapping[int, Sequence[float]],
        stream_id: Tuple[int, ...] = (),
    ) -> "EventLog":
        """Hand-built log; ``arrows`` is keyed by the left site of each bond."""
        cross_lists = [sorted(crosses.get(window.site(i), ())) for i in range(window.n_sites)]
        arrow_lists = [sorted(arrows.get(window.site(i), ())) for i in range(window.n_bonds)]
        for x in crosses:
            window.index(x)
        for x in arrows:
            if not window.x_min <= x < window.x_max:
                raise ValueError(f"Bond ({x}, {x + 1}) lies outside the window.")
        log = cls(
            window=window,
            lam=float(lam),
            cross_times=np.asarray([t for ts in cross_lists for t in ts], dtype=np.float64),
            cross_offsets=_offsets([len(ts) for ts in cross_lists]),
            arrow_times=np.asarray([t for ts in arrow_lists for t in ts], dtype=np.float64),
            arrow_offsets=_offsets([len(ts) for ts in arrow_lists]),
            stream_id=tuple(stream_id),
        )
        log.validate()
        return log

    def validate(self):
        h = self.window.horizon
        for times, offsets, what in (
            (self.cross_times, self.cross_offsets, "cross"),
            (self.arrow_times, self.arrow_offsets, "arrow"),
        ):
            if times.size and (times.min() < 0 or times.max() > h):
                raise ValueError(f"All {what} times must lie in [0, {h}].")
            gaps = np.diff(times)
            run_starts = offsets[1:-1]
            inner = np.ones(gaps.shape[0], dtype=bool)
            inner[run_starts[(run_starts > 0) & (run_starts <= gaps.shape[0])] - 1] = False
            if np.any(gaps[inner] <= 0):
                raise ValueError(f"Each {what} time list must be strictly increasing.")

    def crosses_at(self, x: int) -> np.ndarray:
        i = self.window.index(x)
        return self.cross_times[self.cross_offsets[i] : self.cross_offsets[i + 1]]

    def arrows_on(self, x: int) -> np.ndarray:
        """Arrow times on the bond (x, x + 1)."""
        i = self.window.index(x)
        if i >= self.window.n_bonds:
            raise ValueError(f"Bond ({x}, {x + 1}) lies outside the window.")
        return self.arrow_times[self.arrow_offsets[i] : self.arrow_offsets[i + 1]]

    @property
    def event_count(self) -> int:
        return int(self.cross_times.shape[0] + self.arrow_times.shape[0])

    @cached_property
    def merged(self) -> MergedEvents:
        n, nb = self.window.n_sites, self.window.n_bonds
        times = np.concatenate([self.cross_times, self.arrow_times])
        kinds = np.concatenate(
            [
                np.full(self.cross_times.shape[0], EventKind.CROSS, dtype=np.int8),
                np.full(self.arrow_times.shape[0], EventKind.ARROW, dtype=np.int8),
            ]
        )
        sites = np.concatenate(
            [
                np.repeat(np.arange(n, dtype=np.int64), np.diff(self.cross_offsets)),
                np.repeat(np.arange(nb, dtype=np.int64), np.diff(self.arrow_offsets)),
            ]
        )
        order = np.lexsort((sites, kinds, times))
        return MergedEvents(times[order], kinds[order], sites[order])

    def digest(self) -> str:
        sha = hashlib.sha256()
        sha.update(_header_bytes(self))
        for array in (self.cross_offsets, self.cross_times, self.arrow_offsets, self.arrow_times):
            sha.update(np.ascontiguousarray(array).tobytes())
        return sha.hexdigest()

    def dump(self, path: Union[str, Path]):
        with open(path, "wb") as handle:
            handle.write(_header_bytes(self))
            for times, offsets in ((self.cross_times, self.cross_offsets), (self.arrow_times, self.arrow_offsets)):
                for i in range(offsets.shape[0] - 1):
                    run = times[offsets[i] : offsets[i + 1]]
                    handle.write(struct.pack("<Q", run.shape[0]))
                    handle.write(run.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EventLog":
        with open(path, "rb") as handle:
            data = handle.read()
        if data[:4] != DUMP_MAGIC:
            raise ValueError(f"{path} is not an event log dump.")
        version, x_min, x_max, horizon, lam, n_ids = struct.unpack_from("<HqqddH", data, 4)
        if version != DUMP_VERSION:
            raise ValueError(f"Unsupported event log dump version {version}.")
        pos = 4 + struct.calcsize("<HqqddH")
        stream_id = struct.unpack_from(f"<{n_ids}Q", data, pos)
        pos += 8 * n_ids
        window = Window(x_min, x_max, horizon)

        def read_runs(count):
            nonlocal pos
            runs = []
            for _ in range(count):
                (length,) = struct.unpack_from("<Q", data, pos)
                pos += 8
                runs.append(np.frombuffer(data, dtype="<f8", count=length, offset=pos).astype(np.float64))
                pos += 8 * length
            return runs

        cross_runs = read_runs(window.n_sites)
        arrow_runs = read_runs(window.n_bonds)
        return cls(
            window=window,
            lam=lam,
            cross_times=_concat(cross_runs),
            cross_offsets=_offsets([r.shape[0] for r in cross_runs]),
            arrow_times=_concat(arrow_runs),
            arrow_offsets=_offsets([r.shape[0] for r in arrow_runs]),
            stream_id=tuple(stream_id),
        )


def _offsets(counts: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(np.asarray(counts, dtype=np.int64))]).astype(np.int64)


def _concat(runs):
    return np.concatenate(runs) if runs else np.empty(0, dtype=np.float64)


def _header_bytes(log: EventLog) -> bytes:
    w = log.window
    head = DUMP_MAGIC + struct.pack("<HqqddH", DUMP_VERSION, w.x_min, w.x_max, w.horizon, log.lam, len(log.stream_id))
    return head + struct.pack(f"<{len(log.stream_id)}Q", *log.stream_id)


def _poisson_runs(rng: np.random.Generator, rate: float, horizon: float, owners: int):
    counts = rng.poisson(rate * horizon, owners) if rate > 0 else np.zeros(owners, dtype=np.int64)
    times = rng.uniform(0.0, horizon, int(counts.sum()))
    labels = np.repeat(np.arange(owners), counts)
    times = times[np.lexsort((times, labels))]
    offsets = _offsets(counts)
    _separate_ties(times, labels)
    return times, offsets


def _separate_ties(times: np.ndarray, labels: np.ndarray):
    # float collisions inside one run are nudged apart by one ulp
    while True:
        same = (np.diff(times) <= 0) & (labels[1:] == labels[:-1])
        if not same.any():
            return
        idx = np.nonzero(same)[0] + 1
        times[idx] = np.nextafter(times[idx - 1], np.inf)


def expected_event_count(params: ModelParams, window: Window) -> float:
    return window.horizon * (window.n_sites + params.lam * window.n_bonds)


def sample_event_log(
    params: ModelParams,
    window: Window,
    stream: Substream,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> EventLog:
    expected = expected_event_count(params, window)
    if expected > max_events:
        # events grow like horizon^2 when the window follows the light cone
        suggested = window.horizon * math.sqrt(max_events / expected)
        raise CapacityError(
            f"Window [{window.x_min}, {window.x_max}] x [0, {window.horizon:g}] needs about "
            f"{expected:.3g} events, above the budget of {max_events:.3g}.",
            suggested_horizon=suggested,
        )
    rng = stream.generator()
    cross_times, cross_offsets = _poisson_runs(rng, 1.0, window.horizon, window.n_sites)
    arrow_times, arrow_offsets = _poisson_runs(rng, params.lam, window.horizon, window.n_bonds)
    log = EventLog(
        window=window,
        lam=float(params.lam),
        cross_times=cross_times,
        cross_offsets=cross_offsets,
        arrow_times=arrow_times,
        arrow_offsets=arrow_offsets,
        stream_id=stream.key,
    )
    logger.debug("Sampled event log %s with %d events", stream.key, log.event_count)
    return log


def merged_event_iterator(log: EventLog) -> Iterator[Tuple[float, EventKind, int]]:
    """Yield (time, kind, site) in time order; arrows report the bond's left site."""
    merged = log.merged
    x_min = log.window.x_min
    for t, k, s in zip(merged.times.tolist(), merged.kinds.tolist(), merged.sites.tolist()):
        yield t, EventKind(k), s + x_min
