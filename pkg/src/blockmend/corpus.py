"""Bundled synthetic test corpus.

Procedurally generated 8-bit grayscale images mixing flat regions,
gradients, periodic textures, edges, and band-limited noise, roughly
mimicking the flat/textured balance of natural photographs. Everything is
seeded, so the corpus is identical on every machine; no external dataset
is required to run the benchmark or the acceptance suite.

Run ``python -m blockmend.corpus --out-dir DIR`` to materialize the
images as PGM files.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage

from .image import ImageBuffer

SIZE = 128


def _coords(h=SIZE, w=SIZE):
    return np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")


def _to_image(f: np.ndarray) -> ImageBuffer:
    return ImageBuffer(np.clip(np.round(f), 0, 255).astype(np.uint8))


def _lowpass_noise(seed: int, sigma: float, h=SIZE, w=SIZE) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal((h, w))
    smooth = scipy.ndimage.gaussian_filter(noise, sigma, mode="reflect")
    return smooth / smooth.std()


def gradient_blobs() -> ImageBuffer:
    y, x = _coords()
    f = 70.0 + 0.85 * x + 0.25 * y
    for (cy, cx, amp, rad) in [(36, 40, 38, 19), (88, 92, -30, 23), (30, 100, 24, 14)]:
        f += amp * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * rad**2))
    return _to_image(f)


def stripe_court() -> ImageBuffer:
    y, x = _coords()
    stripes = 128.0 + 52.0 * np.sin(2 * np.pi * x / 7.3 + y / 40.0)
    calm = 118.0 + 0.55 * y
    f = np.where(x < SIZE // 2, stripes, calm)
    return _to_image(f)


def checker_fade() -> ImageBuffer:
    y, x = _coords()
    cells = ((y // 4).astype(int) + (x // 4).astype(int)) % 2
    fade = np.clip(1.4 - (x + y) / 150.0, 0.0, 1.0)
    f = 130.0 + (cells * 2.0 - 1.0) * 44.0 * fade + 0.3 * x
    return _to_image(f)


def ring_pool() -> ImageBuffer:
    y, x = _coords()
    r = np.hypot(y - 52.0, x - 60.0)
    f = 125.0 + 48.0 * np.sin(r / 2.4) * np.exp(-r / 42.0) + 0.2 * y
    return _to_image(f)


def facets() -> ImageBuffer:
    y, x = _coords()
    f = np.full((SIZE, SIZE), 96.0)
    f[y + 0.7 * x > 120] = 156.0
    f[1.3 * y - x > 70] = 66.0
    f[(y - 90) ** 2 + (x - 34) ** 2 < 500] = 200.0
    f += 0.15 * x
    return _to_image(f)


def hills() -> ImageBuffer:
    f = 128.0 + 55.0 * _lowpass_noise(seed=11, sigma=9.0)
    return _to_image(f)


def weave() -> ImageBuffer:
    y, x = _coords()
    f = 124.0 + 40.0 * np.sin(2 * np.pi * x / 9.1) * np.sin(2 * np.pi * y / 8.3)
    f += 12.0 * np.sin(2 * np.pi * (x + y) / 13.7)
    return _to_image(f)


def patch_quilt() -> ImageBuffer:
    y, x = _coords()
    top_left = 112.0 + 0.4 * x
    top_right = 120.0 + 46.0 * np.sin(2 * np.pi * y / 6.7)
    bottom_left = 130.0 + 7.0 * _lowpass_noise(seed=23, sigma=1.6)
    r = np.hypot(y - 96.0, x - 96.0)
    bottom_right = 120.0 + 42.0 * np.sin(r / 2.1)
    f = np.where(
        y < SIZE // 2,
        np.where(x < SIZE // 2, top_left, top_right),
        np.where(x < SIZE // 2, bottom_left, bottom_right),
    )
    return _to_image(f)


def steps() -> ImageBuffer:
    y, x = _coords()
    f = 58.0 + 30.0 * (y // 22).astype(np.float64) + 0.3 * x
    f += 2.6 * _lowpass_noise(seed=31, sigma=1.4)
    return _to_image(f)


def soft_speckle() -> ImageBuffer:
    y, x = _coords()
    f = np.full((SIZE, SIZE), 142.0) + 0.35 * y
    rng = np.random.Generator(np.random.PCG64(47))
    for _ in range(26):
        cy, cx = rng.integers(6, SIZE - 6, size=2)
        amp = rng.uniform(-26, 26)
        rad = rng.uniform(2.5, 6.0)
        f += amp * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * rad**2))
    return _to_image(f)


_BUILDERS = {
    "gradient_blobs": gradient_blobs,
    "stripe_court": stripe_court,
    "checker_fade": checker_fade,
    "ring_pool": ring_pool,
    "facets": facets,
    "hills": hills,
    "weave": weave,
    "patch_quilt": patch_quilt,
    "steps": steps,
    "soft_speckle": soft_speckle,
}


def corpus_names() -> list[str]:
    return list(_BUILDERS)


def build(name: str) -> ImageBuffer:
    return _BUILDERS[name]()


def full_corpus() -> dict[str, ImageBuffer]:
    return {name: fn() for name, fn in _BUILDERS.items()}


def small_corpus(size: int = 48) -> dict[str, ImageBuffer]:
    """Deterministic crops used where full-size runs would be too slow."""
    crops = {
        "gradient_blobs": (20, 24),
        "stripe_court": (30, 34),
        "checker_fade": (8, 8),
        "ring_pool": (28, 36),
        "patch_quilt": (40, 72),
    }
    out = {}
    for name, (r, c) in crops.items():
        img = build(name)
        out[name] = ImageBuffer(img.pixels[r : r + size, c : c + size])
    return out


def main(argv=None) -> int:
    import argparse
    import os

    from .netpbm import save_image

    parser = argparse.ArgumentParser(description="Write the bundled synthetic corpus as PGM files.")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--small", action="store_true", help="write the 48x48 crops instead")
    args = parser.parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    images = small_corpus() if args.small else full_corpus()
    for name, img in images.items():
        save_image(img, os.path.join(args.out_dir, f"{name}.pgm"))
    print(f"wrote {len(images)} images to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
