"""Replica execution: serial or over a process pool, merged by replica index."""

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from tqdm import tqdm

from .errors import ConfigParseError

logger = logging.getLogger(__name__)

ReplicaRecord = Dict[str, Any]
ReplicaTask = Callable[[int, Dict[str, Any]], ReplicaRecord]

DEFAULT_CHUNK_SIZE = 8


def run_chunk(task: ReplicaTask, indices: Sequence[int], payload: Dict[str, Any]) -> List[ReplicaRecord]:
    records = []
    for index in indices:
        record = task(index, payload)
        record["replica"] = index
        records.append(record)
    return records


def payload_fingerprint(payload: Dict[str, Any]) -> str:
    """SHA-256 of the payload; dataclass members enter through their repr."""
    canonical = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _load_checkpoint(path: Path, fingerprint: str) -> Tuple[Dict[int, ReplicaRecord], bool]:
    """Records of a checkpoint written for the same payload, and whether its header was found."""
    done: Dict[int, ReplicaRecord] = {}
    header = False
    if not path.exists():
        return done, header
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                # a torn final line from an interrupted write
                logger.warning("Ignoring unreadable checkpoint line %d in %s", line_number, path)
                continue
            if "fingerprint" in record:
                if record["fingerprint"] != fingerprint:
                    raise ConfigParseError(
                        f"Checkpoint '{path}' was written by a run with a different configuration. "
                        "Remove it or choose another checkpoint path."
                    )
                header = True
                continue
            done[int(record["replica"])] = record
    if done and not header:
        raise ConfigParseError(f"Checkpoint '{path}' has no configuration fingerprint; refusing to reuse it.")
    return done, header


def _open_sink(path: Path, fingerprint: str, header: bool):
    torn = path.exists() and path.stat().st_size > 0 and not path.read_bytes().endswith(b"\n")
    sink = open(path, "a", encoding="utf-8")
    if torn:
        sink.write("\n")
    if not header:
        sink.write(json.dumps({"fingerprint": fingerprint}) + "\n")
    return sink


def parallel_replicas(
    task: ReplicaTask,
    payload: Dict[str, Any],
    replica_count: int,
    worker_count: int = 1,
    checkpoint: Optional[Union[str, Path]] = None,
    progress: bool = False,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> List[ReplicaRecord]:
    """Run ``task(index, payload)`` for every replica index and return records ordered by index.

    ``task`` must be a module-level function so it pickles. Each record
    gains a ``replica`` key. With a checkpoint file, finished records are
    appended as JSON lines after a fingerprint of ``payload`` and reused by
    the next call with the same payload, so an interrupted run resumes
    without changing its results. A checkpoint from another payload raises
    ConfigParseError.
    """
    if worker_count < 1:
        raise ValueError("Worker count must be at least 1.")
    if replica_count < 0:
        raise ValueError("Replica count must be non-negative.")

    checkpoint_path = Path(checkpoint) if checkpoint else None
    fingerprint = payload_fingerprint(payload) if checkpoint_path else ""
    done, header = _load_checkpoint(checkpoint_path, fingerprint) if checkpoint_path else ({}, False)
    pending = [i for i in range(replica_count) if i not in done]
    if done:
        logger.info("Resuming: %d of %d replicas already in checkpoint", replica_count - len(pending), replica_count)

    chunks = [pending[i : i + chunk_size] for i in range(0, len(pending), chunk_size)]
    started = time.perf_counter()
    sink = _open_sink(checkpoint_path, fingerprint, header) if checkpoint_path else None
    bar = tqdm(total=len(pending), desc=getattr(task, "__name__", "replicas"), disable=not progress)
    try:

        def collect(records: List[ReplicaRecord]):
            for record in records:
                done[record["replica"]] = record
                if sink is not None:
                    sink.write(json.dumps(record, sort_keys=True) + "\n")
            if sink is not None:
                sink.flush()
            bar.update(len(records))

        if worker_count == 1:
            for chunk in chunks:
                collect(run_chunk(task, chunk, payload))
        else:
            with ProcessPoolExecutor(max_workers=worker_count) as executor:
                futures = [executor.submit(run_chunk, task, chunk, payload) for chunk in chunks]
                for future in as_completed(futures):
                    collect(future.result())
    finally:
        bar.close()
        if sink is not None:
            sink.close()

    elapsed = time.perf_counter() - started
    if pending:
        logger.info(
            "Ran %d replicas on %d worker(s) in %.2fs (%.1f replicas/s)",
            len(pending),
            worker_count,
            elapsed,
            len(pending) / elapsed if elapsed > 0 else float("inf"),
        )
    return [done[i] for i in range(replica_count)]
