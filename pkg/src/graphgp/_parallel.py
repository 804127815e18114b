"""Deterministic chunked Monte-Carlo execution.

The sample budget is cut into fixed-size chunks; chunk ``c`` always gets the
``c``-th child of the root ``SeedSequence`` and results are combined in chunk
order, so output is identical for any worker count.
"""

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def stable_hash(name):
    return zlib.crc32(str(name).encode("utf-8"))


def derive_seed(root, *keys):
    """Child seed for ``(root, keys...)``; string keys are hashed stably."""
    entropy = [int(root) & 0xFFFFFFFFFFFFFFFF]
    entropy += [stable_hash(k) if isinstance(k, str) else int(k) for k in keys]
    return np.random.SeedSequence(entropy)


def chunk_sizes(total, chunk):
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn, total, chunk, seed, workers=1):
    """Call ``fn(rng, size)`` for each chunk and return the results in chunk order."""
    sizes = chunk_sizes(total, chunk)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in root.spawn(len(sizes))]
    if workers is None or workers <= 1 or len(sizes) == 1:
        return [fn(r, s) for r, s in zip(rngs, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, rngs, sizes))


def map_ordered(fn, items, workers=1):
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
