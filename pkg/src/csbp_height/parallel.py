"""Deterministic fan-out of replications over a process pool."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def _blocks(n, jobs):
    size = max(1, -(-n // (4 * jobs)))
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def map_ordered(fn, *args_and_n_jobs):
    """Run ``fn((*fixed, start, stop))`` over replication blocks, concatenating in order.

    Call as ``map_ordered(fn, *fixed, n, jobs)``.  ``fn`` returns the list of
    per-replication results for ``range(start, stop)``.  Block boundaries
    never affect results because every replication owns its RNG stream.
    """
    *fixed, n, jobs = args_and_n_jobs
    jobs = max(1, int(jobs))
    tasks = [(*fixed, a, b) for a, b in _blocks(int(n), jobs)]
    if jobs == 1 or len(tasks) == 1:
        parts = [fn(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(fn, tasks))
    out = []
    for p in parts:
        out.extend(p)
    return out
