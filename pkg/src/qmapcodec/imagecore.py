"""Planar images, BT.709 colour conversion, padding, PNM I/O and metrics.

Everything here is a pure function over numpy arrays. Planes are stored as
``uint8`` arrays; arithmetic is done in float64 and rounded back on output.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ColorSpace",
    "PlanarImage",
    "PNMError",
    "rgb_to_yuv420",
    "yuv420_to_rgb",
    "pad_replicate",
    "crop",
    "psnr",
    "mse",
    "block_variance_map",
    "read_pnm",
    "write_pnm",
    "format_db",
]

# BT.709 luma coefficients
KR = 0.2126
KB = 0.0722
KG = 1.0 - KR - KB


class ColorSpace(enum.Enum):
    RGB = "RGB"
    YUV444 = "YUV444"
    YUV420 = "YUV420"


class PNMError(ValueError):
    """Malformed or unsupported PNM data."""


@dataclass(frozen=True)
class PlanarImage:
    """Three sample planes plus the pre-padding picture size.

    ``orig_width``/``orig_height`` default to the current size and are carried
    through padding so a decoder can crop back.
    """

    width: int
    height: int
    colorspace: ColorSpace
    planes: tuple
    orig_width: int = field(default=-1)
    orig_height: int = field(default=-1)

    def __post_init__(self):
        if self.orig_width < 0:
            object.__setattr__(self, "orig_width", self.width)
        if self.orig_height < 0:
            object.__setattr__(self, "orig_height", self.height)
        if len(self.planes) != 3:
            raise ValueError("expected three planes, got %d" % len(self.planes))
        planes = tuple(np.asarray(p) for p in self.planes)
        for p in planes:
            if p.dtype != np.uint8:
                raise TypeError("planes must be uint8, got %s" % p.dtype)
        full = (self.height, self.width)
        if planes[0].shape != full:
            raise ValueError("plane 0 has shape %r, expected %r" % (planes[0].shape, full))
        if self.colorspace is ColorSpace.YUV420:
            chroma = ((self.height + 1) // 2, (self.width + 1) // 2)
        else:
            chroma = full
        for p in planes[1:]:
            if p.shape != chroma:
                raise ValueError("chroma plane has shape %r, expected %r" % (p.shape, chroma))
        object.__setattr__(self, "planes", planes)

    @classmethod
    def from_rgb_array(cls, rgb: np.ndarray) -> "PlanarImage":
        """Build an RGB image from an ``(H, W, 3)`` array."""
        rgb = np.asarray(rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("expected an (H, W, 3) array")
        rgb = _to_u8(rgb)
        h, w, _ = rgb.shape
        return cls(w, h, ColorSpace.RGB, tuple(rgb[:, :, k].copy() for k in range(3)))

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "PlanarImage":
        gray = _to_u8(np.asarray(gray))
        h, w = gray.shape
        return cls(w, h, ColorSpace.RGB, (gray.copy(), gray.copy(), gray.copy()))

    def to_rgb_array(self) -> np.ndarray:
        if self.colorspace is not ColorSpace.RGB:
            raise ValueError("image is %s, not RGB" % self.colorspace.value)
        return np.stack(self.planes, axis=-1)

    def as_float(self):
        return tuple(p.astype(np.float64) for p in self.planes)


def _to_u8(a) -> np.ndarray:
    """Round half up and clamp to [0, 255]."""
    a = np.asarray(a)
    if a.dtype == np.uint8:
        return a
    return np.clip(np.floor(np.asarray(a, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def _downsample2(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    p = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    return 0.25 * (p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2])


def rgb_to_yuv420(img: PlanarImage) -> PlanarImage:
    """Full-range BT.709 RGB to YUV 4:2:0 with 2x2 box-averaged chroma."""
    if img.colorspace is not ColorSpace.RGB:
        raise ValueError("rgb_to_yuv420 needs an RGB image, got %s" % img.colorspace.value)
    r, g, b = img.as_float()
    y = KR * r + KG * g + KB * b
    cb = (b - y) / (2.0 * (1.0 - KB)) + 128.0
    cr = (r - y) / (2.0 * (1.0 - KR)) + 128.0
    return PlanarImage(
        img.width,
        img.height,
        ColorSpace.YUV420,
        (_to_u8(y), _to_u8(_downsample2(cb)), _to_u8(_downsample2(cr))),
        img.orig_width,
        img.orig_height,
    )


def yuv420_to_rgb(img: PlanarImage) -> PlanarImage:
    """Nearest-neighbour chroma upsampling followed by the inverse BT.709 matrix."""
    if img.colorspace is not ColorSpace.YUV420:
        raise ValueError("yuv420_to_rgb needs a YUV420 image, got %s" % img.colorspace.value)
    y, u, v = img.as_float()
    h, w = y.shape
    u = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)[:h, :w] - 128.0
    v = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)[:h, :w] - 128.0
    r = y + 2.0 * (1.0 - KR) * v
    b = y + 2.0 * (1.0 - KB) * u
    g = (y - KR * r - KB * b) / KG
    return PlanarImage(
        img.width,
        img.height,
        ColorSpace.RGB,
        (_to_u8(r), _to_u8(g), _to_u8(b)),
        img.orig_width,
        img.orig_height,
    )


def _ceil_to(n: int, multiple: int) -> int:
    return -(-n // multiple) * multiple


def pad_replicate(img: PlanarImage, multiple: int) -> PlanarImage:
    """Extend width and height to multiples of ``multiple`` by edge replication."""
    if multiple < 1:
        raise ValueError("multiple must be >= 1")
    w = _ceil_to(img.width, multiple)
    h = _ceil_to(img.height, multiple)
    if (w, h) == (img.width, img.height):
        return img
    planes = [np.pad(img.planes[0], ((0, h - img.height), (0, w - img.width)), mode="edge")]
    for p in img.planes[1:]:
        if img.colorspace is ColorSpace.YUV420:
            ch, cw = (h + 1) // 2, (w + 1) // 2
        else:
            ch, cw = h, w
        planes.append(np.pad(p, ((0, ch - p.shape[0]), (0, cw - p.shape[1])), mode="edge"))
    return PlanarImage(w, h, img.colorspace, tuple(planes), img.orig_width, img.orig_height)


def crop(img: PlanarImage, width: int | None = None, height: int | None = None) -> PlanarImage:
    """Crop to ``width`` x ``height`` (defaults to the recorded original size)."""
    width = img.orig_width if width is None else width
    height = img.orig_height if height is None else height
    if width > img.width or height > img.height:
        raise ValueError("cannot crop %dx%d image to %dx%d" % (img.width, img.height, width, height))
    planes = [img.planes[0][:height, :width]]
    for p in img.planes[1:]:
        if img.colorspace is ColorSpace.YUV420:
            planes.append(p[: (height + 1) // 2, : (width + 1) // 2])
        else:
            planes.append(p[:height, :width])
    return PlanarImage(width, height, img.colorspace, tuple(np.ascontiguousarray(p) for p in planes))


def mse(reference, test) -> float:
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("plane shapes differ: %r vs %r" % (a.shape, b.shape))
    return float(np.mean((a - b) ** 2))


def psnr(reference, test, peak: float = 255.0) -> float:
    """PSNR in dB; ``math.inf`` when the planes are identical."""
    err = mse(reference, test)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def format_db(value: float):
    """JSON-friendly PSNR: the infinite case becomes the string ``"inf"``."""
    return "inf" if math.isinf(value) else value


def block_variance_map(plane, block: int = 16) -> np.ndarray:
    """Population variance of every non-overlapping ``block`` x ``block`` tile."""
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape
    if h % block or w % block:
        raise ValueError("plane %dx%d is not a multiple of %d" % (w, h, block))
    tiles = p.reshape(h // block, block, w // block, block)
    return tiles.var(axis=(1, 3))


# --- PNM ---------------------------------------------------------------------


def _read_header_tokens(data: bytes, count: int):
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PNMError("truncated PNM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(path) -> PlanarImage:
    """Read a binary P5 (grey) or P6 (RGB) file with maxval 255.

    Grey images are returned as RGB with three identical planes.
    """
    data = Path(path).read_bytes()
    tokens, offset = _read_header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise PNMError("unsupported PNM magic %r" % magic)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PNMError("non-numeric PNM header field") from None
    if maxval != 255:
        raise PNMError("only maxval 255 is supported, got %d" % maxval)
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise PNMError("PNM raster truncated: %d of %d bytes" % (len(raster), expected))
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return PlanarImage.from_gray(arr.reshape(height, width))
    return PlanarImage.from_rgb_array(arr.reshape(height, width, 3))


def write_pnm(path, image) -> None:
    """Write a P6 file for RGB images, P5 for a 2-D array."""
    if isinstance(image, PlanarImage):
        if image.colorspace is ColorSpace.YUV420:
            image = yuv420_to_rgb(image)
        elif image.colorspace is not ColorSpace.RGB:
            raise ValueError("cannot write %s as PNM" % image.colorspace.value)
        arr = image.to_rgb_array()
        header = b"P6\n%d %d\n255\n" % (image.width, image.height)
    else:
        arr = _to_u8(np.asarray(image))
        if arr.ndim != 2:
            raise ValueError("grey PNM needs a 2-D array")
        header = b"P5\n%d %d\n255\n" % (arr.shape[1], arr.shape[0])
    Path(path).write_bytes(header + np.ascontiguousarray(arr).tobytes())
