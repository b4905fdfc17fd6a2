"""Deterministic synthetic pictures used by tests, experiments and the CLI."""

from __future__ import annotations

import numpy as np

from .imagecore import PlanarImage

__all__ = ["FIXTURES", "make_fixture", "roi_mask", "textured_roi_fixture"]

FIXTURES = ("flat", "natural", "high-frequency", "constant")


def _grid(width, height):
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    return xx / max(width - 1, 1), yy / max(height - 1, 1)


def _flat(width, height, rng):
    x, y = _grid(width, height)
    base = 60 + 120 * x + 40 * y
    rgb = np.stack([base, base * 0.9 + 10, base * 0.7 + 30], axis=-1)
    return rgb + rng.normal(0, 1.5, rgb.shape)


def _natural(width, height, rng):
    x, y = _grid(width, height)
    smooth = 110 + 50 * np.sin(2 * np.pi * (1.3 * x + 0.4 * y)) + 30 * np.cos(2 * np.pi * 2.1 * y)
    ridges = 25 * np.sin(2 * np.pi * (9 * x * (1 + 0.5 * y)))
    texture = rng.normal(0, 1, (height // 4 + 1, width // 4 + 1))
    texture = np.kron(texture, np.ones((4, 4)))[:height, :width] * 12
    lum = smooth + ridges * (x > 0.45) + texture * (y > 0.5)
    rgb = np.stack([lum + 20 * x, lum, lum - 25 * y + 10], axis=-1)
    return rgb + rng.normal(0, 2.0, rgb.shape)


def _high_frequency(width, height, rng):
    yy, xx = np.mgrid[0:height, 0:width]
    checker = ((xx // 2 + yy // 2) % 2) * 140 + 50
    lum = checker + rng.normal(0, 25, (height, width))
    return np.stack([lum, lum * 0.95, lum * 0.9 + 10], axis=-1)


def _constant(width, height, rng):
    return np.full((height, width, 3), 128.0)


_MAKERS = {"flat": _flat, "natural": _natural, "high-frequency": _high_frequency, "constant": _constant}


def make_fixture(name: str, width: int = 256, height: int = 256, seed: int = 0) -> PlanarImage:
    """One of :data:`FIXTURES` as an RGB image; identical for identical arguments."""
    try:
        maker = _MAKERS[name]
    except KeyError:
        raise ValueError("unknown fixture %r (choose from %s)" % (name, ", ".join(FIXTURES))) from None
    rng = np.random.default_rng(seed)
    return PlanarImage.from_rgb_array(maker(width, height, rng))


def roi_mask(width: int, height: int, fraction: float = 0.5) -> np.ndarray:
    """Centred rectangular mask covering ``fraction`` of each dimension (block aligned)."""
    bw = int(round(width * fraction / 16)) * 16
    bh = int(round(height * fraction / 16)) * 16
    x0 = ((width - bw) // 2) // 16 * 16
    y0 = ((height - bh) // 2) // 16 * 16
    mask = np.zeros((height, width), dtype=np.uint8)
    mask[y0:y0 + bh, x0:x0 + bw] = 255
    return mask


def textured_roi_fixture(width: int = 256, height: int = 256, seed: int = 0):
    """Natural fixture plus a centred ROI mask."""
    return make_fixture("natural", width, height, seed), roi_mask(width, height)
