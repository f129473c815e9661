"""Counter-based sampling and order-independent reductions.

Sample ``i`` of stream ``s`` under master seed ``seed`` always comes from
block ``i // BLOCK`` generated by ``SeedSequence(seed, spawn_key=(s, block))``,
so any thread schedule reproduces the same numbers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

BLOCK = 1024

T = TypeVar("T")


def block_generator(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def block_normals(seed: int, block: int, dim: int, stream: int = 0) -> np.ndarray:
    return block_generator(seed, block, stream).standard_normal((BLOCK, dim))


def normals(seed: int, start: int, count: int, dim: int, stream: int = 0) -> np.ndarray:
    """Rows ``start .. start+count-1`` of the stream's ``N(0, I_dim)`` sample table."""
    out = np.empty((count, dim))
    i = start
    while i < start + count:
        b, r = divmod(i, BLOCK)
        take = min(BLOCK - r, start + count - i)
        out[i - start : i - start + take] = block_normals(seed, b, dim, stream)[r : r + take]
        i += take
    return out


def block_ranges(n: int) -> list[tuple[int, int]]:
    return [(a, min(a + BLOCK, n)) for a in range(0, n, BLOCK)]


def map_blocks(fn: Callable[[int, int], T], n: int, threads: int = 1) -> list[T]:
    """Apply ``fn(start, stop)`` to every sample block; results in block order."""
    ranges = block_ranges(n)
    if threads <= 1 or len(ranges) <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), ranges))


def tree_reduce(items: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """Fixed-shape pairwise reduction (shape depends only on ``len(items)``)."""
    if not items:
        raise ValueError("nothing to reduce")
    level = list(items)
    while len(level) > 1:
        nxt = [combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def moments(x: np.ndarray) -> tuple[int, float, float]:
    """``(count, mean, M2)`` of a 1-d array."""
    x = np.asarray(x, dtype=float)
    mu = float(np.mean(x)) if x.size else 0.0
    return x.size, mu, float(np.sum((x - mu) ** 2))


def merge_moments(a, b):
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    if n == 0:
        return 0, 0.0, 0.0
    delta = mb - ma
    return n, ma + delta * nb / n, qa + qb + delta * delta * na * nb / n
