from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from bcslab.errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    raw = os.environ.get("BCSLAB_WORKERS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError("BCSLAB_WORKERS must be an integer", key="BCSLAB_WORKERS", value=raw) from None
    if count < 1:
        raise ConfigError("BCSLAB_WORKERS must be >= 1", key="BCSLAB_WORKERS", value=raw)
    return count


def ordered_map(fn: Callable[[T], R], items: Iterable[T], serial: bool = False) -> list[R]:
    """Apply fn to every item; results come back in input order either way."""
    items = list(items)
    workers = 1 if serial else min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug("running %d tasks on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
