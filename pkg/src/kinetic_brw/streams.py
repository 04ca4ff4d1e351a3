"""Deterministic random streams for reproducible parallel Monte Carlo.

Every unit of work derives its own generator from the master seed and an
integer path through a counter-based bit generator.  Replicate k always sees
the same stream no matter how replicates are scheduled across workers, which
is what makes outputs byte-identical for any worker count.

Work is always split into fixed-size chunks (`CHUNK` replicates or pool
slots); the chunk index, not the worker id, enters the stream path.
"""
from __future__ import annotations

import numpy as np

# Fixed chunk size for batched replicate processing.  Part of the stream
# addressing scheme: changing it changes which draws each replicate sees.
CHUNK = 1024

# Domain tags keeping unrelated consumers of one master seed apart.
POPULATION = 1
SMOOTHING = 2
FIXED_POINT = 3
POOL_BASE = 4
POOL_EXTEND = 5
VERIFY = 6
LAW_CHECK = 7
BOUNDARY_ECF = 8
BOUNDARY_MART = 9
MAX_DECREASE = 10


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator addressed by (master_seed, path)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def chunk_ranges(n: int):
    """Yield (chunk_index, start, size) covering range(n) in CHUNK pieces."""
    c = 0
    start = 0
    while start < n:
        size = min(CHUNK, n - start)
        yield c, start, size
        c += 1
        start += size
