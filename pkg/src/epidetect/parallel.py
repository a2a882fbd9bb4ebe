"""Deterministic index-parallel evaluation via fork-based worker pools.

Each simulated scenario owns its random stream, so the result of
`fn(index)` never depends on which worker runs it or in which order.
The work closure is handed to children through fork inheritance (set as
a module global before the pool starts) to avoid pickling large models
per task.
"""
from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

_WORK: Callable[[int], object] | None = None

_MIN_PER_WORKER = 16  # below this, pool overhead beats the speedup


def _run_span(span: tuple[int, int]) -> list:
    lo, hi = span
    fn = _WORK
    assert fn is not None
    return [fn(i) for i in range(lo, hi)]


def default_workers() -> int:
    return os.cpu_count() or 1


def indexed_map(fn: Callable[[int], T], count: int, workers: int = 1) -> list[T]:
    """[fn(0), ..., fn(count-1)], optionally computed by forked workers.

    Results are returned in index order and are identical for any worker
    count as long as fn(i) is self-contained (draws only from streams
    derived from i).
    """
    global _WORK
    if count <= 0:
        return []
    workers = max(1, int(workers))
    if workers == 1 or count < 2 * _MIN_PER_WORKER or "fork" not in mp.get_all_start_methods():
        return [fn(i) for i in range(count)]

    n_spans = min(workers * 4, max(1, count // _MIN_PER_WORKER))
    bounds = [count * j // n_spans for j in range(n_spans + 1)]
    spans = [(bounds[j], bounds[j + 1]) for j in range(n_spans) if bounds[j] < bounds[j + 1]]

    _WORK = fn
    try:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            out: list[T] = []
            for part in pool.map(_run_span, spans):
                out.extend(part)
        return out
    finally:
        _WORK = None
