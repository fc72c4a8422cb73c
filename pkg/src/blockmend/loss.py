"""Deterministic block-loss pattern generation.

Two patterns are provided: a dispersed checker-style pattern that loses
every odd-row/odd-column block (isolated losses, ~25% rate on even grids)
and an exact-count random pattern driven by a splitmix64-seeded
Fisher-Yates shuffle so identical (grid, rate, seed) always reproduce the
same mask, independent of platform.
"""

from __future__ import annotations

import math

import numpy as np

from .image import BlockGrid, LossMask, PixelState

_MASK64 = (1 << 64) - 1
SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15
_MIX_MUL_1 = 0xBF58476D1CE4E5B9
_MIX_MUL_2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit splitmix generator (Steele et al. constants)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + SPLITMIX64_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX_MUL_1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_MUL_2) & _MASK64
        return z ^ (z >> 31)


def fisher_yates(count: int, rng: SplitMix64) -> list[int]:
    """Shuffle [0, count) in place with modulo draws from rng."""
    order = list(range(count))
    for i in range(count - 1, 0, -1):
        j = rng.next_u64() % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def _mask_from_lost_blocks(grid: BlockGrid, lost_blocks) -> LossMask:
    states = np.zeros((grid.height, grid.width), dtype=np.uint8)
    b = grid.block_size
    for r, c in lost_blocks:
        states[r * b : (r + 1) * b, c * b : (c + 1) * b] = PixelState.LOST
    return LossMask(states)


def gen_dispersed_mask(grid: BlockGrid) -> LossMask:
    """Lose block (r, c) iff both r and c are odd (0-based).

    Every lost block then has all existing 8 block-neighbours fully
    available, which keeps the support area of each loss intact.
    """
    lost = [(r, c) for r in range(1, grid.rows, 2) for c in range(1, grid.cols, 2)]
    return _mask_from_lost_blocks(grid, lost)


def gen_random_mask(grid: BlockGrid, rate: float, seed: int) -> LossMask:
    """Lose exactly round(rate * blocks) distinct blocks, chosen by seeded shuffle.

    The count rounds half-up. Adjacent losses may touch; the concealment
    driver handles them sequentially.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"loss rate must be within [0, 1], got {rate}")
    total = grid.rows * grid.cols
    count = int(math.floor(rate * total + 0.5))
    order = fisher_yates(total, SplitMix64(seed))
    lost = [(idx // grid.cols, idx % grid.cols) for idx in order[:count]]
    return _mask_from_lost_blocks(grid, lost)
