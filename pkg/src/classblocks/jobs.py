"""Background jobs: bounded worker pool, tickets, cooperative cancellation.

Results are opaque byte payloads stored in a shared LRU cache keyed by
(kind, dataset, params); resubmitting identical work yields a fresh ticket
marked as a cache hit with byte-identical content. Tickets only move
forward (queued -> running -> done/failed) except for cancellation, which
is cooperative at iteration boundaries: a cancelled job publishes no
partial result.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

JOB_KINDS = ("seriation", "probe", "hierarchy-build")


class JobCancelled(Exception):
    """Raised inside a worker when its job was cancelled."""


class ByteCache:
    """Small thread-safe LRU of serialized payloads."""

    def __init__(self, max_entries: int = 256):
        self.max_entries = max_entries
        self._data: OrderedDict[str, bytes] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: str) -> bytes | None:
        with self._lock:
            if key not in self._data:
                return None
            self._data.move_to_end(key)
            return self._data[key]

    def put(self, key: str, value: bytes) -> None:
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.max_entries:
                self._data.popitem(last=False)

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


class Job:
    def __init__(self, job_id: str, kind: str, cache_key: str):
        self.job_id = job_id
        self.kind = kind
        self.cache_key = cache_key
        self.state = "queued"
        self.progress = 0.0
        self.cache_hit = False
        self.error: str | None = None
        self.result: bytes | None = None
        self.cancel_event = threading.Event()
        self.future = None
        self._lock = threading.Lock()

    def _advance(self, state: str) -> bool:
        forward = {"queued": ("running", "cancelled", "failed"),
                   "running": ("done", "failed", "cancelled"),
                   "done": (), "failed": (), "cancelled": ()}
        with self._lock:
            if state not in forward[self.state]:
                return False
            self.state = state
            return True

    def ticket(self) -> dict:
        with self._lock:
            return {
                "job_id": self.job_id,
                "kind": self.kind,
                "state": self.state,
                "progress": round(self.progress, 6),
                "cache_hit": self.cache_hit,
                "result_location": (f"/api/v1/jobs/{self.job_id}/result"
                                    if self.state == "done" else None),
                "error": self.error,
            }


class JobManager:
    """Executes job functions on a bounded pool and tracks their tickets.

    A job function receives ``(progress, should_stop)`` callables and
    returns the serialized result payload; it should call ``should_stop``
    at iteration boundaries and raise ``JobCancelled`` when it returns True
    (or simply let long loops check it via the provided helper).
    """

    def __init__(self, workers: int, cache: ByteCache):
        self.pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self.cache = cache
        self.jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, cache_key: str,
               fn: Callable[[Callable[[float], None], Callable[[], bool]], bytes]) -> Job:
        job = Job(job_id=f"job-{uuid.uuid4().hex[:12]}", kind=kind,
                  cache_key=cache_key)
        with self._lock:
            self.jobs[job.job_id] = job

        cached = self.cache.get(cache_key)
        if cached is not None:
            job.cache_hit = True
            job.result = cached
            job.progress = 1.0
            job._advance("running")
            job._advance("done")
            return job

        def report(fraction: float) -> None:
            job.progress = min(max(fraction, 0.0), 1.0)

        def should_stop() -> bool:
            return job.cancel_event.is_set()

        def run():
            if job.cancel_event.is_set() or not job._advance("running"):
                return
            try:
                payload = fn(report, should_stop)
            except JobCancelled:
                job._advance("cancelled")
                return
            except Exception as exc:  # noqa: BLE001 - reported on the ticket
                job.error = f"{type(exc).__name__}: {exc}"
                job._advance("failed")
                return
            if job.cancel_event.is_set():
                job._advance("cancelled")
                return
            job.result = payload
            job.progress = 1.0
            self.cache.put(cache_key, payload)
            job._advance("done")

        job.future = self.pool.submit(run)
        return job

    def get(self, job_id: str) -> Job:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise KeyError(f"unknown job {job_id!r}") from None

    def cancel(self, job_id: str) -> Job:
        job = self.get(job_id)
        job.cancel_event.set()
        if job.future is not None and job.future.cancel():
            job._advance("cancelled")
        return job

    def shutdown(self) -> None:
        self.pool.shutdown(wait=False, cancel_futures=True)
