"""Counter-based random streams for reproducible resampling.

All randomness in this package flows through Philox4x64-10 (the counter-based
generator shipped with numpy), keyed by a user-supplied 64-bit seed. Streams
are carved directly out of the counter space, so any unit of work can be
recomputed in isolation, in any order, or in parallel without changing a
single output bit.

Bootstrap weight streams are fully specified so that another implementation
can reproduce them:

* ``key = seed`` (one 64-bit word, upper key word zero);
* one weight vector over ``n`` instances spans ``ceil(n / 4)`` counter
  blocks (Philox emits four 64-bit words per block);
* draw ``b`` reads blocks ``[b * ceil(n/4), (b + 1) * ceil(n/4))`` and keeps
  the first ``n`` words, in instance order;
* a Rademacher weight is ``+1`` if the word's least significant bit is set,
  else ``-1``;
* a Mammen two-point weight maps ``u = (word >> 11) / 2**53`` (a uniform on
  [0, 1)) to ``(1 - sqrt(5)) / 2`` when ``u < (sqrt(5) + 1) / (2 sqrt(5))``
  and to ``(1 + sqrt(5)) / 2`` otherwise.

Derived seeds for independent units of work (Monte Carlo replications, the
bootstrap inside a replication) come from numpy's ``SeedSequence`` hashed
over ``(seed, *path)``.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

RNG_NAME = "philox4x64"

_SQRT5 = math.sqrt(5.0)
_MAMMEN_LOW = (1.0 - _SQRT5) / 2.0
_MAMMEN_HIGH = (1.0 + _SQRT5) / 2.0
_MAMMEN_P_LOW = (_SQRT5 + 1.0) / (2.0 * _SQRT5)


class WeightFamily(str, Enum):
    """Mean-zero, unit-variance multiplier weight families."""

    RADEMACHER = "rademacher"
    MAMMEN = "mammen"


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit seed for a sub-task.

    The same ``(seed, *path)`` always yields the same child seed; distinct
    paths yield (for practical purposes) independent streams.
    """
    return int(SeedSequence([int(seed) & (2**64 - 1), *map(int, path)]).generate_state(1, np.uint64)[0])


def generator(seed: int, stream: int = 0) -> Generator:
    """A numpy Generator on the Philox stream ``key = (seed, stream)``."""
    return Generator(Philox(key=[int(seed) & (2**64 - 1), int(stream)]))


def _raw_draw_words(seed: int, first_draw: int, n_draws: int, n: int) -> np.ndarray:
    """Raw 64-bit words for draws ``first_draw .. first_draw + n_draws - 1``.

    Returns an ``(n_draws, n)`` uint64 array. Each draw occupies whole
    counter blocks, so the mapping from draw index to words is independent
    of how the draws are batched.
    """
    blocks_per_draw = -(-n // 4)
    words = Philox(key=int(seed) & (2**64 - 1),
                   counter=first_draw * blocks_per_draw).random_raw(n_draws * blocks_per_draw * 4)
    return words.reshape(n_draws, blocks_per_draw * 4)[:, :n]


def multiplier_weights(seed: int, first_draw: int, n_draws: int, n: int,
                       family: WeightFamily = WeightFamily.RADEMACHER) -> np.ndarray:
    """Multiplier weights for a contiguous range of bootstrap draws.

    Parameters
    ----------
    seed : int
        Stream key.
    first_draw : int
        Index of the first draw in the returned block.
    n_draws : int
        Number of draws (rows).
    n : int
        Number of weights per draw (columns), one per panel instance.
    family : WeightFamily
        Weight distribution; both families have mean 0 and variance 1.

    Returns
    -------
    numpy.ndarray
        ``(n_draws, n)`` float64 weights.
    """
    raw = _raw_draw_words(seed, first_draw, n_draws, n)
    if family == WeightFamily.RADEMACHER:
        return (raw & np.uint64(1)).astype(np.float64) * 2.0 - 1.0
    if family == WeightFamily.MAMMEN:
        u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.where(u < _MAMMEN_P_LOW, _MAMMEN_LOW, _MAMMEN_HIGH)
    raise ValueError(f"unknown weight family: {family!r}")
