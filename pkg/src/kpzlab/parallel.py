"""Deterministic index-chunked process pool.

Work is split by replicate index into contiguous chunks; results come back
keyed by chunk and are reassembled in index order, so the output is
bit-identical for any worker count.
"""

import multiprocessing as mp
import os
from typing import Callable, List, Tuple


def default_threads() -> int:
    envval = os.environ.get("KPZ_THREADS")
    if envval:
        try:
            return max(1, int(envval))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def chunk_ranges(start: int, count: int, threads: int, min_chunk: int = 256) -> List[Tuple[int, int]]:
    if count <= 0:
        return []
    per = max(min_chunk, -(-count // (threads * 4)))
    out = []
    at = start
    while at < start + count:
        c = min(per, start + count - at)
        out.append((at, c))
        at += c
    return out


def run_chunked(worker: Callable, tasks: list, threads: int) -> list:
    """worker(task) for each task; preserves task order in the result list.

    worker must be a module-level function (picklable).  threads <= 1 runs
    inline, which also keeps tracebacks simple.
    """
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    ctx = mp.get_context("fork")
    with ctx.Pool(processes=min(threads, len(tasks))) as pool:
        return pool.map(worker, tasks)
