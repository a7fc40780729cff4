"""Replica blocks and their deterministic parallel execution.

Replicas are cut into fixed-size blocks; block ``b`` always gets the child
stream ``rng.spawn(label, b)``.  Results are merged in block order, so the
numbers do not depend on how many workers ran them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .rng import RngStream

DEFAULT_BLOCK = 2000


def block_sizes(total: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(int(total), int(block))
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn, tasks: list[tuple], workers: int = 1) -> list:
    """``[fn(*t) for t in tasks]``, optionally spread over processes, order preserved."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def replicate(fn, total: int, rng: RngStream, label: str, *args, workers: int = 1, block: int = DEFAULT_BLOCK):
    """Run ``fn(*args, size, stream)`` per block and concatenate array results."""
    sizes = block_sizes(total, block)
    tasks = [(*args, size, rng.spawn(label, b)) for b, size in enumerate(sizes)]
    parts = map_blocks(fn, tasks, workers)
    if parts and isinstance(parts[0], np.ndarray):
        return np.concatenate(parts)
    return parts
