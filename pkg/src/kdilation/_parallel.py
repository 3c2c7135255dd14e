import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "KDILATION_THREADS"


def n_threads():
    """Worker count: ``$KDILATION_THREADS`` or the available CPUs."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        return max(1, value)
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def parallel_map(fn, items):
    """Order-preserving map; results never depend on the worker count."""
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
