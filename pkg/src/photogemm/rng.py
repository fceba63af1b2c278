"""Counter-based, position-addressed random streams.

Every random number in the simulator is a pure function of
``(seed, domain, position)``.  ``domain`` is a tuple of small integers that
separates independent uses (slice noise, aggregated noise, matrix generation,
...), and ``position`` is a flat index into that stream.  Any worker can
therefore draw exactly the numbers it needs, in any order, and get the same
values a serial run would.

The generator is numpy's Philox4x64 keyed from a ``SeedSequence``.  One raw
64-bit word maps to one uniform with 53 random bits, and a standard normal is
obtained through the inverse normal CDF, so position ``p`` of a normal stream
depends on raw word ``p`` only.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtri

# stream domains
SLICE_NOISE = 1
AGGREGATE_NOISE = 2
SCALAR_NOISE = 3
MATRIX_DATA = 4
TRIAL_SEED = 5

_WORDS_PER_BLOCK = 4
_U53 = 2.0**-53


@lru_cache(maxsize=4096)
def _key(seed: int, domain: tuple[int, ...]) -> tuple[int, int]:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in domain))
    k = ss.generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def _philox(seed: int, domain: tuple[int, ...]) -> np.random.Philox:
    return np.random.Philox(key=np.array(_key(seed, domain), dtype=np.uint64))


def raw_words(seed: int, domain: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """Raw 64-bit words ``start .. start+count-1`` of a keyed stream."""
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    bg = _philox(seed, domain)
    block, skip = divmod(int(start), _WORDS_PER_BLOCK)
    if block:
        bg.advance(block)
    words = bg.random_raw(count + skip)
    return words[skip:]


def uniforms(seed: int, domain: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    w = raw_words(seed, domain, start, count)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def normals(seed: int, domain: tuple[int, ...], start: int, count: int) -> np.ndarray:
    """Standard normals at positions ``start .. start+count-1``."""
    return ndtri(uniforms(seed, domain, start, count))


def generator(seed: int, domain: tuple[int, ...]) -> np.random.Generator:
    """A sequential generator for bulk data that is drawn in one piece."""
    return np.random.Generator(_philox(seed, domain))


def derive_seed(seed: int, domain: tuple[int, ...]) -> int:
    """A child 64-bit seed, for handing a fresh root to a sub-computation."""
    return int(raw_words(seed, (TRIAL_SEED,) + tuple(domain), 0, 1)[0])


def slice_pair_normals(seed: int, u: int, v: int, start: int, count: int) -> np.ndarray:
    """Noise for slice pair ``(u, v)`` at flat product slots ``start ..``.

    Each slice pair has its own stream, indexed by the global product slot
    ``(i * N + j) * K + k``.  Slice ``u`` always holds the same bits below the
    mantissa's leading digit, so a draw keeps its meaning when the number of
    slices changes with the mantissa width.
    """
    return normals(seed, (SLICE_NOISE, int(u), int(v)), start, count)
