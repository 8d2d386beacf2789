"""Replicate-level parallelism with a deterministic merge."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

THREADS_ENV = "REGEN_LIL_THREADS"


def worker_cap() -> int | None:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return cap


def resolve_workers(requested: int | None = None) -> int:
    """Requested count (default: CPU count), capped by REGEN_LIL_THREADS."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError("worker count must be positive")
    cap = worker_cap()
    return min(n, cap) if cap is not None else n


def _run_chunk(fn, args, indices):
    return [fn(i, *args) for i in indices]


def map_replicates(fn, n_items: int, args: tuple = (), workers: int | None = None) -> list:
    """``[fn(i, *args) for i in range(n_items)]``, possibly across processes.

    ``fn`` must be a module-level function.  Results come back in index
    order whatever the scheduling, so output is independent of ``workers``.
    """
    workers = min(resolve_workers(workers), max(n_items, 1))
    if workers == 1 or n_items < 2:
        return _run_chunk(fn, args, range(n_items))
    # contiguous chunks, several per worker to even out load
    n_chunks = min(n_items, workers * 4)
    bounds = [n_items * k // n_chunks for k in range(n_chunks + 1)]
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_run_chunk, [fn] * len(chunks), [args] * len(chunks), chunks):
            out.extend(part)
    return out
