"""Order-preserving map over a process pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def parallel_map(func, items, jobs: int | None = 1) -> list:
    """``[func(x) for x in items]``, spread over ``jobs`` worker processes.

    Results come back in input order whatever the number of workers.
    """
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(items) < 2:
        return [func(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=chunk))
