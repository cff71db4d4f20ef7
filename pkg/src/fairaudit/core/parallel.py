"""Ordered fan-out of independent tasks onto a thread pool."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from fairaudit.core.errors import ConfigError


T = TypeVar("T")
R = TypeVar("R")


def run_ordered(fn: Callable[[T], R], items: Iterable[T], n_jobs: int = 1) -> list[R]:
    """
    Apply ``fn`` to every item and return results in input order.

    With ``n_jobs`` > 1 the calls run on a ThreadPoolExecutor. Tasks must not
    share mutable state; each one owns whatever random stream it needs, so the
    result does not depend on ``n_jobs``. The first failure is re-raised.
    """
    if n_jobs < 1:
        raise ConfigError(f"n_jobs must be >= 1, got {n_jobs}", field="n_jobs")
    items = list(items)
    if n_jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=n_jobs) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [future.result() for future in futures]
