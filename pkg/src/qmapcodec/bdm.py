"""Bit distribution maps: construction, regrouping, normalisation and rendering.

A map holds the average bit cost of picture blocks. Uniform maps have one
value per ``block x block`` cell; record maps keep the native, possibly
irregular, block partition of an external encoder trace.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BlockBitRecord",
    "BitDistributionMap",
    "TraceFormatError",
    "OverlapError",
    "CoverageError",
    "parse_trace",
    "load_trace",
    "regroup_16",
    "normalize_pair",
    "bdm_variance",
    "downsample_16",
    "render_pgm",
]

LATENT_BLOCK = 16


class TraceFormatError(ValueError):
    """Trace text is not valid JSON or does not follow the trace schema."""


class OverlapError(ValueError):
    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__("blocks overlap: %s and %s" % (first.describe(), second.describe()))


class CoverageError(ValueError):
    def __init__(self, x, y, missing):
        self.x = x
        self.y = y
        self.missing = missing
        super().__init__("trace leaves %d pixels uncovered, first at (x=%d, y=%d)" % (missing, x, y))


@dataclass(frozen=True)
class BlockBitRecord:
    x: int
    y: int
    w: int
    h: int
    bits: float

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("block offset must be non-negative: %s" % self.describe())
        if self.w < 1 or self.h < 1:
            raise ValueError("block size must be at least 1x1: %s" % self.describe())
        if not (self.bits >= 0 and math.isfinite(self.bits)):
            raise ValueError("block bits must be finite and >= 0: %s" % self.describe())

    @property
    def area(self) -> int:
        return self.w * self.h

    def describe(self) -> str:
        return "(x=%d, y=%d, w=%d, h=%d)" % (self.x, self.y, self.w, self.h)


class BitDistributionMap:
    """Average bits per block over a ``width x height`` picture.

    Build with :meth:`uniform` (grid of cells) or :meth:`from_records`.
    ``values`` is the cell grid for uniform maps and the per-record average
    for record maps.
    """

    def __init__(self, values, width: int, height: int, block: int | None = None, records=None, scale: str = "pixel"):
        values = np.array(values, dtype=np.float64)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("bit values must be finite and non-negative")
        if block is None and records is None:
            raise ValueError("map needs either a block size or records")
        if block is not None:
            grid = (-(-height // block), -(-width // block))
            if values.shape != grid:
                raise ValueError("grid %r does not match %dx%d picture with %d-pixel blocks" % (values.shape, width, height, block))
        values.setflags(write=False)
        self.values = values
        self.width = int(width)
        self.height = int(height)
        self.block = block
        self.records = None if records is None else tuple(records)
        self.scale = scale

    @classmethod
    def uniform(cls, values, width: int, height: int, block: int = LATENT_BLOCK) -> "BitDistributionMap":
        return cls(values, width, height, block=block)

    @classmethod
    def from_records(cls, records, width: int, height: int) -> "BitDistributionMap":
        records = list(records)
        return cls([r.bits for r in records], width, height, records=records)

    @property
    def is_uniform(self) -> bool:
        return self.block is not None

    @property
    def shape(self):
        return self.values.shape

    def total(self) -> float:
        return float(self.values.sum())

    def to_dict(self) -> dict:
        if self.is_uniform:
            return {
                "width": self.width,
                "height": self.height,
                "block": self.block,
                "scale": self.scale,
                "values": self.values.tolist(),
            }
        return {
            "width": self.width,
            "height": self.height,
            "blocks": [{"x": r.x, "y": r.y, "w": r.w, "h": r.h, "bits": r.bits} for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BitDistributionMap":
        """Read a uniform map written by :meth:`to_json`, or a trace (regrouped to 16x16)."""
        obj = _load_json(text)
        if "values" in obj:
            try:
                bdm = cls.uniform(obj["values"], obj["width"], obj["height"], obj.get("block", LATENT_BLOCK))
            except (KeyError, TypeError) as exc:
                raise TraceFormatError("bad map JSON: %s" % exc) from None
            bdm.scale = obj.get("scale", "pixel")
            return bdm
        records, w, h = parse_trace(text)
        return regroup_16(records, (w, h))

    def __repr__(self):
        kind = "block=%d" % self.block if self.is_uniform else "%d records" % len(self.records)
        return "BitDistributionMap(%dx%d, %s)" % (self.width, self.height, kind)


# --- traces --------------------------------------------------------------------

_INT_FIELDS = ("x", "y", "w", "h")


def _load_json(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError("malformed JSON: %s" % exc) from None
    if not isinstance(obj, dict):
        raise TraceFormatError("top level must be an object")
    return obj


def _uint(obj, key, where):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise TraceFormatError("%s: field %r must be a non-negative integer, got %r" % (where, key, v))
    return v


def parse_trace(text: str):
    """Validate a JSON trace; returns ``(records, width, height)``.

    Records must lie inside the picture, must not overlap and must cover
    every pixel.
    """
    obj = _load_json(text)
    width = _uint(obj, "width", "trace")
    height = _uint(obj, "height", "trace")
    if width == 0 or height == 0:
        raise TraceFormatError("trace picture must be at least 1x1")
    blocks = obj.get("blocks")
    if not isinstance(blocks, list):
        raise TraceFormatError("trace needs a 'blocks' list")
    records = []
    for n, b in enumerate(blocks):
        where = "block %d" % n
        if not isinstance(b, dict):
            raise TraceFormatError("%s is not an object" % where)
        x, y, w, h = (_uint(b, k, where) for k in _INT_FIELDS)
        bits = b.get("bits")
        if isinstance(bits, bool) or not isinstance(bits, (int, float)):
            raise TraceFormatError("%s: field 'bits' must be a number" % where)
        try:
            rec = BlockBitRecord(x, y, w, h, float(bits))
        except ValueError as exc:
            raise TraceFormatError("%s: %s" % (where, exc)) from None
        if x + w > width or y + h > height:
            raise TraceFormatError("%s %s extends past the %dx%d picture" % (where, rec.describe(), width, height))
        records.append(rec)

    owner = np.full((height, width), -1, dtype=np.int64)
    for n, r in enumerate(records):
        region = owner[r.y:r.y + r.h, r.x:r.x + r.w]
        taken = region[region >= 0]
        if taken.size:
            raise OverlapError(records[int(taken[0])], r)
        region[...] = n
    gaps = np.argwhere(owner < 0)
    if gaps.size:
        y0, x0 = gaps[0]
        raise CoverageError(int(x0), int(y0), len(gaps))
    return records, width, height


def load_trace(path):
    from pathlib import Path

    return parse_trace(Path(path).read_text())


def regroup_16(records, dims, block: int = LATENT_BLOCK) -> BitDistributionMap:
    """Spread each record's bits over the cells it overlaps, in proportion to area.

    ``dims`` is ``(width, height)``.
    """
    width, height = dims
    rows, cols = -(-height // block), -(-width // block)
    cells = np.zeros((rows, cols))
    for r in records:
        density = r.bits / r.area
        for i in range(r.y // block, (r.y + r.h - 1) // block + 1):
            oy = min(r.y + r.h, (i + 1) * block) - max(r.y, i * block)
            for j in range(r.x // block, (r.x + r.w - 1) // block + 1):
                ox = min(r.x + r.w, (j + 1) * block) - max(r.x, j * block)
                cells[i, j] += density * ox * oy
    return BitDistributionMap.uniform(cells, width, height, block)


# --- analysis ------------------------------------------------------------------


def normalize_pair(a: BitDistributionMap, b: BitDistributionMap):
    """Divide both maps by their shared maximum; returns ``(a', b', upper)``."""
    if not (a.is_uniform and b.is_uniform) or a.shape != b.shape or a.block != b.block:
        raise ValueError("maps must share the same uniform geometry")
    upper = max(float(a.values.max()), float(b.values.max()))
    if upper == 0:
        raise ValueError("both maps are all zero; normalisation bound is undefined")
    return (
        BitDistributionMap.uniform(a.values / upper, a.width, a.height, a.block),
        BitDistributionMap.uniform(b.values / upper, b.width, b.height, b.block),
        upper,
    )


def bdm_variance(bdm) -> float:
    """Population variance over all cells."""
    values = np.asarray(getattr(bdm, "values", bdm), dtype=np.float64)
    return float(values.var())


def downsample_16(bdm: BitDistributionMap, latent_shape=None) -> BitDistributionMap:
    """Re-tag a 16x16 pixel-scale map as a latent-grid map (values unchanged)."""
    if not bdm.is_uniform or bdm.block != LATENT_BLOCK:
        raise ValueError("downsampling needs a uniform 16x16 map")
    if bdm.width % LATENT_BLOCK or bdm.height % LATENT_BLOCK:
        raise ValueError("picture %dx%d is not a multiple of 16" % (bdm.width, bdm.height))
    if latent_shape is not None and tuple(latent_shape) != bdm.shape:
        raise ValueError("map grid %r does not match latent grid %r" % (bdm.shape, tuple(latent_shape)))
    out = BitDistributionMap.uniform(bdm.values, bdm.width, bdm.height, LATENT_BLOCK)
    out.scale = "latent"
    return out


def render_pgm(bdm: BitDistributionMap, upper: float | None = None) -> np.ndarray:
    """Grey picture with each block at ``round(255 * value / upper)``.

    Record maps paint each record with its bits per 16x16 area so native
    and regrouped renderings share one brightness scale. ``upper`` defaults
    to the map maximum.
    """
    if bdm.is_uniform:
        density = bdm.values
    else:
        density = np.array([r.bits * LATENT_BLOCK ** 2 / r.area for r in bdm.records])
    if upper is None:
        upper = float(density.max()) if density.size else 0.0
        upper = upper or 1.0
    if not upper > 0:
        raise ValueError("upper bound must be positive")
    level = np.clip(np.floor(255.0 * density / upper + 0.5), 0, 255).astype(np.uint8)
    if bdm.is_uniform:
        img = np.repeat(np.repeat(level, bdm.block, axis=0), bdm.block, axis=1)
        return np.ascontiguousarray(img[: bdm.height, : bdm.width])
    img = np.zeros((bdm.height, bdm.width), dtype=np.uint8)
    for r, g in zip(bdm.records, level):
        img[r.y:r.y + r.h, r.x:r.x + r.w] = g
    return img
