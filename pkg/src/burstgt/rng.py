"""Stream-split random generators.

Every random draw in the package comes from ``make_rng(seed, stream)``.  The
pair is mixed by :class:`numpy.random.SeedSequence` (``entropy=seed``,
``spawn_key=(stream,)``), so distinct streams are statistically independent and
no generator state is ever shared between trials or workers.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int) -> np.random.Generator:
    if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
        raise ValueError(f"seed and stream must be 64-bit unsigned, got {seed}, {stream}")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def bernoulli_positions(rng: np.random.Generator, length: int, p: float) -> np.ndarray:
    """Sorted indices of successes in ``length`` i.i.d. Bernoulli(p) trials.

    Rare successes are located by geometric jumps, near-certain ones by jumping
    over the rare failures; otherwise a direct uniform sweep is used.  All three
    paths have the same law.
    """
    if length <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(length, dtype=np.int64)
    if p < 0.05:
        return _geometric_positions(rng, length, p)
    if p > 0.95:
        keep = np.ones(length, dtype=bool)
        keep[_geometric_positions(rng, length, 1.0 - p)] = False
        return np.flatnonzero(keep)
    return np.flatnonzero(rng.random(length) < p)


def _geometric_positions(rng, length, p):
    mean = length * p
    chunk = int(mean + 6.0 * np.sqrt(mean) + 16)
    pieces = []
    last = -1
    while True:
        # Clamping keeps cumsum from overflowing; any gap past the end stops the scan.
        gaps = np.minimum(rng.geometric(p, size=chunk), length + 1)
        pos = last + np.cumsum(gaps)
        pieces.append(pos)
        last = int(pos[-1])
        if last >= length:
            break
    out = np.concatenate(pieces)
    return out[out < length]
