from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None) -> int:
    if threads is not None and threads >= 1:
        return threads
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(
    func: Callable[[T], R],
    items: Iterable[T],
    threads: int | None = None,
) -> list[R]:
    """Map func over items on a thread pool and return results in input order.

    numpy releases the GIL inside the heavy kernels, so threads give real
    speedups here.  Results are always gathered in submission order, which
    keeps any later reduction independent of scheduling.
    """
    work = list(items)
    count = resolve_threads(threads)
    if count == 1 or len(work) <= 1:
        return [func(item) for item in work]
    logger.debug("running %d tasks on %d threads", len(work), count)
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(func, work))
