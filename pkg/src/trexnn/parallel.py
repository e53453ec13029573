"""Process-pool map honouring the ``TREXNN_WORKERS`` environment variable."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "TREXNN_WORKERS"
_IN_WORKER_ENV = "TREXNN_IN_WORKER"


def default_workers() -> int:
    if os.environ.get(_IN_WORKER_ENV):
        return 1
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _mark_worker():
    # nested pools would oversubscribe; workers run everything serially
    os.environ[_IN_WORKER_ENV] = "1"


def parallel_map(fn, items, n_jobs=None):
    """``[fn(x) for x in items]``, possibly on a process pool. Order is preserved."""
    items = list(items)
    n_jobs = default_workers() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n_jobs, initializer=_mark_worker) as pool:
        return list(pool.map(fn, items))
