"""Seeded random streams.

Every draw in the library goes through a Philox counter-based generator keyed by the
user seed. Partitioned Monte Carlo loops give chunk ``i`` the same key with the counter
jumped ``i`` times, so results do not depend on how work is split.
"""
import numpy as np

_KEY_MASK = (1 << 128) - 1


def generator(seed: int, chunk: int = 0) -> np.random.Generator:
    """Generator for ``seed``; ``chunk`` selects a non-overlapping child stream"""
    bit_generator = np.random.Philox(key=int(seed) & _KEY_MASK)
    if chunk:
        bit_generator = bit_generator.jumped(int(chunk))
    return np.random.Generator(bit_generator)


def child_seed(seed: int, index: int) -> int:
    """Derived integer seed for an independent sub-run (ensembles, repeated trials)"""
    return int(np.random.SeedSequence([int(seed) & _KEY_MASK, int(index)]).generate_state(1)[0])


def chunk_sizes(total: int, chunk_size: int) -> list[int]:
    if total < 1:
        return []
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])
