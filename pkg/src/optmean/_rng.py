"""Counter-based uniform streams with per-replicate windows.

Every Monte Carlo consumer in this package draws its randomness through
`replicate_uniforms`, which assigns replicate ``r`` a fixed window of the
Philox counter space under a key derived from the experiment labels. The
value of a replicate therefore depends only on ``(key, r)``: work can be
chunked or parallelised any way at all and the streams do not move.

Reductions over replicates are done in fixed-size blocks (`BLOCK`) so that
floating-point accumulation order is also independent of chunking.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numpy.random import Philox

# Replicates per reduction block. Partial sums are always taken over whole
# blocks (the trailing block may be short), so totals are bit-identical no
# matter how work is partitioned.
BLOCK = 8192

_U64 = np.uint64


def stream_key(*parts) -> tuple[int, int]:
    """Derive a 128-bit Philox key from arbitrary labels.

    Labels are joined into a single string and hashed, so any mix of seed
    integers, distribution names, and sizes yields a well-separated key.
    """
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return (
        int.from_bytes(digest[:8], "little"),
        int.from_bytes(digest[8:16], "little"),
    )


def replicate_uniforms(key: tuple[int, int], first: int, count: int,
                       draws: int) -> np.ndarray:
    """Uniform(0, 1) variates for replicates ``first .. first+count-1``.

    Each replicate owns a disjoint counter window wide enough for ``draws``
    values (padded to the 4-word Philox output granularity), so the row for
    replicate ``r`` is the same whether it is drawn alone or inside a block.

    Returns an array of shape ``(count, draws)`` with values in the open
    interval (0, 1).
    """
    if draws <= 0 or count <= 0:
        raise ValueError("count and draws must be positive")
    words_per_rep = -(-draws // 4) * 4
    counters_per_rep = words_per_rep // 4
    start = first * counters_per_rep
    bg = Philox(counter=[start, 0, 0, 0], key=list(key))
    raw = bg.random_raw(count * words_per_rep).reshape(count, words_per_rep)
    # 53-bit mantissa plus a half-ulp offset keeps u strictly inside (0, 1)
    u = (raw[:, :draws] >> _U64(11)).astype(np.float64)
    u *= 2.0 ** -53
    u += 2.0 ** -54
    return u


def block_ranges(total: int):
    """Yield ``(first, count)`` pairs covering ``range(total)`` in BLOCK steps."""
    first = 0
    while first < total:
        yield first, min(BLOCK, total - first)
        first += BLOCK
