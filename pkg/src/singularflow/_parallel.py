"""Deterministic parallel map for independent sweep tasks.

SINGULAR_FLOW_THREADS caps the worker count (default 1, i.e. sequential).
Results are always returned in input order, so aggregation is deterministic
regardless of scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("SINGULAR_FLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
