"""Order-preserving parallel map over particle indices."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def map_particles(fn: Callable[[int], T], n: int, threads: int = 1) -> list[T]:
    """Return [fn(0), ..., fn(n-1)]; results never depend on the thread count."""
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
        return list(pool.map(fn, range(n)))
