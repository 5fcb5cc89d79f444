"""Order-preserving map used for deterministic reductions.

Results come back in input order whatever the completion order, so a caller
that sums them left to right gets the same floating-point result for every
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    # numpy releases the GIL inside matrix products, so threads are enough
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def ordered_sum(terms: list):
    """Left-to-right sum in list order."""
    out = terms[0]
    for x in terms[1:]:
        out = out + x
    return out
