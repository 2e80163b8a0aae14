"""Process-pool map for the embarrassingly parallel parts (labeling, fibers, LD)."""

from __future__ import annotations

import os
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None,
                 chunksize: int | None = None) -> list[R]:
    """Order-preserving map; runs in-process when ``threads`` is None or <= 1.

    ``fn`` and the items must be picklable when a pool is used.
    """
    items = list(items)
    if not threads or threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    chunksize = chunksize or max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
