"""Deterministic chunked parallelism for independent per-patch work."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def effective_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return threads


def run_chunked(worker, n_items: int, threads: int | None = 1, min_chunk: int = 128) -> None:
    """Invoke ``worker(start, stop)`` over a partition of range(n_items).

    Workers must write only to disjoint per-item outputs; under that
    contract the result is identical for every thread count.
    """
    threads = effective_threads(threads)
    if n_items <= 0:
        return
    if threads == 1:
        worker(0, n_items)
        return
    chunk = max(min_chunk, -(-n_items // (threads * 4)))
    bounds = [(a, min(a + chunk, n_items)) for a in range(0, n_items, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for f in [pool.submit(worker, a, b) for a, b in bounds]:
            f.result()
