"""Deterministic chunked execution.

Work is split into chunks whose boundaries depend only on the problem size,
never on the thread count, and results come back in chunk order. Any
reduction done by the caller in that order is therefore identical for every
``threads`` value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from .errors import InvalidArgument

T = TypeVar("T")

THREADS_ENV = "RMFLAB_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise InvalidArgument(f"{THREADS_ENV} must be >= 1")
    return n


def chunk_ranges(total: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(fn: Callable[[int, int], T], ranges: Sequence[tuple[int, int]], threads: int | None = None) -> list[T]:
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise InvalidArgument("threads must be >= 1")
    if threads == 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
