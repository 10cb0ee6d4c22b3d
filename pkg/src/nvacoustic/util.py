"""Small shared helpers."""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def parallel_map(fn: Callable, items: Sequence, n_workers: int = 1) -> list:
    """Map ``fn`` over ``items``, optionally on a bounded process pool.

    Results are assembled in input order, so the output is independent of
    worker scheduling.  ``n_workers <= 1`` runs in-process.
    """
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    context = multiprocessing.get_context("fork")
    workers = min(n_workers, len(items))
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
