"""Bounded process-level parallelism for independent refits."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int | None = 1) -> list[R]:
    """``[fn(x) for x in items]``, spread over up to ``threads`` processes.

    Results come back in input order, so output never depends on the
    worker count. ``fn`` must be a picklable module-level function.
    """
    items = list(items)
    n = default_threads() if threads is None else int(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
