"""Bit-exact netpbm I/O (PGM P5 read/write, PPM P6 write) and 8-bit gray PNG read.

Mask files use the PGM convention 255 = available, 0 = lost; the
transient RECONSTRUCTED state is never serialized.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError
from .image import BLOCK_SIZE, ImageBuffer, LossMask, PixelState

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_WHITESPACE = b" \t\n\r\x0b\x0c"


def _parse_pnm_header(data: bytes, magic: bytes):
    """Parse 'P5'/'P6' header; returns (width, height, maxval, raster offset)."""
    if data[:2] != magic:
        raise FormatError(f"not a {magic.decode()} file")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between fields
        while pos < len(data) and data[pos : pos + 1] in _WHITESPACE:
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE:
            pos += 1
        if start == pos:
            raise FormatError("unexpected end of file in header")
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(f"malformed header field {token!r}")
        fields.append(int(token))
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after header")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError("image dimensions must be positive")
    return width, height, maxval, pos


def _read_pgm(data: bytes) -> np.ndarray:
    width, height, maxval, offset = _parse_pnm_header(data, b"P5")
    if maxval != 255:
        raise FormatError(f"unsupported bit depth (maxval {maxval})")
    expected = width * height
    raster = data[offset : offset + expected]
    if len(raster) < expected:
        raise FormatError("unexpected end of file")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _read_png_gray(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode != "L":
            raise FormatError(f"unsupported PNG mode {im.mode!r} (need 8-bit grayscale)")
        return np.asarray(im, dtype=np.uint8)


def load_image(path) -> ImageBuffer:
    """Read a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        fh.seek(0)
        if head[:2] == b"P5":
            return ImageBuffer(_read_pgm(fh.read()))
    if head[: len(_PNG_SIGNATURE)] == _PNG_SIGNATURE:
        return ImageBuffer(_read_png_gray(path))
    raise FormatError(f"unsupported image format: {os.fspath(path)}")


def save_image(img: ImageBuffer, path) -> None:
    """Write a P5 PGM; samples are clamped to [0, 255] and rounded half-up."""
    raster = img.quantized()
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.tobytes())


def load_mask(path) -> LossMask:
    """Read a mask PGM (255 = available, 0 = lost).

    Lost pixels outside the full 16x16 block area are rejected: ragged
    margins must stay available.
    """
    with open(path, "rb") as fh:
        raw = _read_pgm(fh.read())
    bad = (raw != 0) & (raw != 255)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError(f"invalid mask sample {raw[r, c]} at ({r}, {c}); expected 0 or 255")
    states = np.where(raw == 0, np.uint8(PixelState.LOST), np.uint8(PixelState.AVAILABLE))
    h, w = raw.shape
    lost = states == PixelState.LOST
    grid_h = (h // BLOCK_SIZE) * BLOCK_SIZE
    grid_w = (w // BLOCK_SIZE) * BLOCK_SIZE
    if lost[grid_h:, :].any() or lost[:, grid_w:].any():
        raise FormatError("mask marks pixels outside the full-block area as lost")
    return LossMask(states)


def save_mask(mask: LossMask, path) -> None:
    if (mask.states == PixelState.RECONSTRUCTED).any():
        raise ValueError("RECONSTRUCTED state is transient and cannot be serialized")
    raster = np.where(mask.states == PixelState.LOST, 0, 255).astype(np.uint8)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.tobytes())


def save_ppm(rgb: np.ndarray, path) -> None:
    """Write an 8-bit P6 PPM from an (H, W, 3) uint8 array."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 array")
    h, w = rgb.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rgb.tobytes())
