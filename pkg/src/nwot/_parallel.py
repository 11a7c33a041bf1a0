"""Restart-level parallelism, capped by the NWOT_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("NWOT_THREADS", "")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_tasks))


def run_indexed(fn, n_tasks: int):
    """Run fn(i) for i in range(n_tasks); results in index order.

    Tasks are independent solver restarts; execution order never affects
    results, so threading is purely a wall-clock optimization.
    """
    workers = worker_count(n_tasks)
    if workers <= 1 or n_tasks <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_tasks)))
