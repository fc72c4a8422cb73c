"""Grayscale raster, per-pixel loss state, and the 16x16 block grid.

Samples are held as float64 during processing; quantization to 8 bit
happens only when writing files. Buffers are immutable once constructed
(the wrapped arrays are marked read-only) so they can be shared freely
across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

BLOCK_SIZE = 16


class PixelState(enum.IntEnum):
    AVAILABLE = 0
    LOST = 1
    RECONSTRUCTED = 2


def _frozen_array(data, dtype) -> np.ndarray:
    arr = np.array(data, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """2-D grayscale raster with real-valued samples (source range 0..255)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.pixels, np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def quantized(self) -> np.ndarray:
        """8-bit view of the samples: clamped to [0, 255], rounded half-up."""
        clipped = np.clip(self.pixels, 0.0, 255.0)
        return np.floor(clipped + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class LossMask:
    """Per-pixel availability map (AVAILABLE / LOST / RECONSTRUCTED)."""

    states: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.states, np.uint8)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
        if arr.max(initial=0) > int(PixelState.RECONSTRUCTED):
            raise ValueError("mask contains a value outside the PixelState range")
        object.__setattr__(self, "states", arr)

    @classmethod
    def all_available(cls, height: int, width: int) -> "LossMask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.states.shape[0]

    @property
    def width(self) -> int:
        return self.states.shape[1]

    def lost_count(self) -> int:
        return int(np.count_nonzero(self.states == PixelState.LOST))


@dataclass(frozen=True)
class BlockGrid:
    """The grid of full 16x16 blocks covering an image.

    Pixels outside the full-block area (ragged right/bottom margins) never
    take part in loss patterns; they stay available as estimator support.
    """

    width: int
    height: int
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.block_size < 1:
            raise ValueError("block size must be positive")

    @property
    def rows(self) -> int:
        return self.height // self.block_size

    @property
    def cols(self) -> int:
        return self.width // self.block_size

    def block_origin(self, block_id: tuple[int, int]) -> tuple[int, int]:
        r, c = block_id
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ValueError(f"block {block_id} outside {self.rows}x{self.cols} grid")
        return r * self.block_size, c * self.block_size


def require_same_shape(a, b) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def apply_mask(img: ImageBuffer, mask: LossMask) -> ImageBuffer:
    """Zero out lost pixels (display convention only).

    Estimators must read availability from the mask, never from the zeroed
    sample values.
    """
    require_same_shape(img.pixels, mask.states)
    out = img.pixels.copy()
    out[mask.states == PixelState.LOST] = 0.0
    return ImageBuffer(out)
