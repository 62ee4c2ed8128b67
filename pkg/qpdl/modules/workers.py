from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from qpdl.config import max_workers

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Order-preserving map over a thread pool capped by QPDL_THREADS."""
    items = list(items)
    workers = min(max_workers(), max(1, len(items)))

    if workers == 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
