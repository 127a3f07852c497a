"""Replication worker pool.

Monte-Carlo replications are split into chunks and mapped over a
concurrent.futures executor. Each chunk carries its own seeds, results come
back in submission order, so the merged output is the same for every
worker count. threads=1 runs inline without an executor; threads=0 uses
every CPU.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar

from core.errors import InvalidParameter

_log = logging.getLogger("cluster")

T = TypeVar("T")
R = TypeVar("R")

BACKENDS = ("process", "thread")
DEFAULT_CHUNK = 250


def chunk_ranges(total: int, chunk: int = DEFAULT_CHUNK) -> List[Tuple[int, int]]:
    """[(start, stop), ...] covering range(total) in chunks of at most `chunk`."""
    total, chunk = int(total), max(1, int(chunk))
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


class ReplicationCluster:
    def __init__(self, threads: int = 1, backend: str = "process"):
        self.workers = 1
        self.backend = backend
        self.last_error = ""
        self._executor: Executor | None = None
        self.resize(threads)

    def __enter__(self) -> "ReplicationCluster":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def is_running(self) -> bool:
        return self._executor is not None

    def validate_worker_count(self, threads: int) -> tuple[bool, int]:
        # 0 = auto
        threads = int(threads)
        if threads < 0:
            return False, 0
        if threads == 0:
            return True, max(1, os.cpu_count() or 1)
        return True, threads

    def resize(self, threads: int) -> None:
        if self.backend not in BACKENDS:
            raise InvalidParameter(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        ok, workers = self.validate_worker_count(threads)
        if not ok:
            self.last_error = f"Invalid worker count threads={threads}. Must be >= 0 (0 = auto)."
            raise InvalidParameter(self.last_error)
        self.last_error = ""
        if workers != self.workers:
            self.stop()
        self.workers = workers

    def start(self) -> None:
        if self._executor is not None or self.workers == 1:
            return
        if self.backend == "thread":
            self._executor = ThreadPoolExecutor(max_workers=self.workers)
        else:
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
        _log.info("[CLUSTER] START backend=%s workers=%d", self.backend, self.workers)

    def stop(self) -> None:
        if self._executor is None:
            return
        self._executor.shutdown(wait=True)
        self._executor = None
        _log.info("[CLUSTER] STOP backend=%s", self.backend)

    def map(self, fn: Callable[[T], R], tasks: Sequence[T] | Iterable[T]) -> List[R]:
        """fn over tasks, results in task order."""
        tasks = list(tasks)
        if self.workers == 1 or len(tasks) <= 1:
            return [fn(task) for task in tasks]
        self.start()
        return list(self._executor.map(fn, tasks))
