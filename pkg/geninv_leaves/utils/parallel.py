"""
Thread fan-out for independent grid lines.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_lines(fn: Callable[[T], R], items: Iterable[T], parallel: bool = False,
              max_workers: Optional[int] = None) -> Iterator[R]:
    """
    Apply fn to each item, yielding results in input order.

    With parallel=True the calls run on a thread pool; the first exception
    raised by any call is re-raised when its result is reached.

    Args:
        fn: Work function; must be safe to call from several threads
        items: Work items
        parallel: Run on a ThreadPoolExecutor instead of inline
        max_workers: Pool size (executor default when None)
    """
    items = list(items)
    if not parallel or len(items) < 2:
        for item in items:
            yield fn(item)
        return
    logger.debug(f"dispatching {len(items)} lines to thread pool")
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        yield from pool.map(fn, items)
