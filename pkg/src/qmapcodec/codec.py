"""Surrogate latent codec with a hyperprior layout.

Geometry follows a learned codec with four stride-2 stages in the analysis
transform and one more in the hyper encoder: the luma latent has one cell per
16x16 picture block, the hyper latent one per 32x32 block. The analysis
transform itself is a blockwise orthonormal 16x16 DCT keeping the first ``C``
zigzag coefficients as channels.

Per colour component the container holds two range-coded streams:

* hyper stream: the quantised hyper latent (mean bank and scale bank) under a
  factorised Laplacian prior whose per-channel scale is sent up front;
* residual stream: ``round((y - mu) * gain * qstep)`` under a Laplacian whose
  scale comes from the decoded hyper latent, scaled by the same gain and step.

Entropy parameters depend only on the hyper stream, so the residual stream
parses without touching decoded latent values. Chroma (U and V) share one
pair of streams and are conditioned on the reconstructed luma.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn

from .entropy import (
    SIGMA_MIN,
    BitLedger,
    DecodeError,
    QuantizedLaplacian,
    RangeDecoder,
    RangeEncoder,
    get_expgolomb,
    put_expgolomb,
    sigma_from_index,
    sigma_index,
)
from .gain import (
    GainUnit,
    GainVector,
    INTERP_MODES,
    apply_gain,
    apply_sigma_gain,
    default_gain_unit,
    gain_for_beta,
    quantize_beta,
)
from .imagecore import (
    ColorSpace,
    PlanarImage,
    crop,
    pad_replicate,
    psnr,
    rgb_to_yuv420,
)
from .qmap import (
    QPRED_MODES,
    QualityIndexMap,
    decode_qmap,
    downsample_qmap,
    encode_qmap,
)

__all__ = [
    "BLOCK",
    "PAD_MULTIPLE",
    "CodecConfig",
    "HyperLatent",
    "Bitstream",
    "ContainerError",
    "EncodeLedger",
    "EncodeResult",
    "analysis",
    "synthesis",
    "hyper_encode",
    "quantize_hyper",
    "predict_mu_sigma",
    "code_residual",
    "decode_residual",
    "encode",
    "encode_detailed",
    "decode",
    "decode_detailed",
    "bits_per_block",
    "block_costs",
    "prepare_image",
    "zigzag_order",
]

BLOCK = 16
PAD_MULTIPLE = 32
# Output scale of the codec's analysis stage: DCT coefficients are divided by
# this before quantisation, playing the role of a trained transform's scale.
LATENT_STEP = 8.0
# Samples are centred before the transform, as in JPEG.
LEVEL_SHIFT = 128.0
MAGIC = b"QMC1"
VERSION = 1

FLAG_QMAP = 0x01
FLAG_PAPER_INTERP = 0x02
FLAG_QPRED_AVG = 0x04
FLAG_CUSTOM_GAIN = 0x08
FLAG_NO_SIGMA_GAIN = 0x10

_HEADER = struct.Struct("<4sBBIIIIHHI")
_SEGMENTS = ("qmap", "y_hyper", "y_residual", "uv_hyper", "uv_residual")

_SIGMA_BITS = 6  # 64-level sigma grid


class ContainerError(ValueError):
    """Malformed, truncated or unsupported bitstream container."""


@dataclass(frozen=True)
class CodecConfig:
    c_y: int = 16
    c_uv: int = 8
    beta: float = 1.0
    qmap: QualityIndexMap | None = None
    qpred: str = "paper"
    interp: str = "linear"
    sigma_gain: bool = True
    gain_unit_y: GainUnit | None = None
    gain_unit_uv: GainUnit | None = None

    def __post_init__(self):
        if not 0 < self.c_uv < self.c_y <= BLOCK * BLOCK:
            raise ValueError("need 0 < c_uv < c_y <= 256, got c_y=%d c_uv=%d" % (self.c_y, self.c_uv))
        if self.qpred not in QPRED_MODES:
            raise ValueError("qpred must be one of %s" % (QPRED_MODES,))
        if self.interp not in INTERP_MODES:
            raise ValueError("interp must be one of %s" % (INTERP_MODES,))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for unit, c in ((self.gain_unit_y, self.c_y), (self.gain_unit_uv, 2 * self.c_uv)):
            if unit is not None and unit.channels != c:
                raise ValueError("gain unit has %d channels, component needs %d" % (unit.channels, c))

    def gains(self, beta: float | None = None):
        beta = self.beta if beta is None else beta
        unit_y = self.gain_unit_y or default_gain_unit(self.c_y)
        unit_uv = self.gain_unit_uv or default_gain_unit(2 * self.c_uv)
        return gain_for_beta(unit_y, beta, self.interp), gain_for_beta(unit_uv, beta, self.interp)

    def to_dict(self) -> dict:
        return {
            "c_y": self.c_y,
            "c_uv": self.c_uv,
            "beta": self.beta,
            "qpred": self.qpred,
            "interp": self.interp,
            "sigma_gain": self.sigma_gain,
            "qmap": None if self.qmap is None else self.qmap.q.tolist(),
            "gain_unit_y": None if self.gain_unit_y is None else json.loads(self.gain_unit_y.to_json()),
            "gain_unit_uv": None if self.gain_unit_uv is None else json.loads(self.gain_unit_uv.to_json()),
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# --- transforms ----------------------------------------------------------------


@lru_cache(maxsize=None)
def zigzag_order(n: int = BLOCK):
    """``(rows, cols)`` index arrays of an ``n x n`` block in JPEG zigzag order."""
    cells = sorted(
        ((r, c) for r in range(n) for c in range(n)),
        key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0]),
    )
    rows = np.array([r for r, _ in cells])
    cols = np.array([c for _, c in cells])
    return rows, cols


def _blocks(plane):
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape
    if h % BLOCK or w % BLOCK:
        raise ValueError("plane %dx%d is not a multiple of %d" % (w, h, BLOCK))
    return p.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def analysis(planes, channels: int) -> np.ndarray:
    """Blockwise orthonormal DCT-II; the first ``channels`` zigzag coefficients of
    every plane become latent channels. Returns ``(len(planes) * channels, H/16, W/16)``."""
    if isinstance(planes, np.ndarray) and planes.ndim == 2:
        planes = [planes]
    rows, cols = zigzag_order()
    rows, cols = rows[:channels], cols[:channels]
    out = []
    for plane in planes:
        coeffs = dctn(_blocks(plane), axes=(2, 3), norm="ortho")
        out.append(np.moveaxis(coeffs[:, :, rows, cols], -1, 0))
    return np.concatenate(out, axis=0)


def synthesis(latent, n_planes: int = 1) -> list:
    """Inverse of :func:`analysis` with missing coefficients taken as zero."""
    latent = np.asarray(latent, dtype=np.float64)
    c_total, h, w = latent.shape
    if c_total % n_planes:
        raise ValueError("%d channels do not split into %d planes" % (c_total, n_planes))
    c = c_total // n_planes
    rows, cols = zigzag_order()
    planes = []
    for k in range(n_planes):
        coeffs = np.zeros((h, w, BLOCK, BLOCK))
        coeffs[:, :, rows[:c], cols[:c]] = np.moveaxis(latent[k * c:(k + 1) * c], 0, -1)
        blocks = idctn(coeffs, axes=(2, 3), norm="ortho")
        planes.append(blocks.transpose(0, 2, 1, 3).reshape(h * BLOCK, w * BLOCK))
    return planes


@dataclass
class HyperLatent:
    """Hyper latent at half the latent resolution: a mean bank and a scale bank."""

    mean: np.ndarray
    scale: np.ndarray
    latent_shape: tuple

    @property
    def shape(self):
        return self.mean.shape


def _pad_even(a):
    _, h, w = a.shape
    return np.pad(a, ((0, 0), (0, h % 2), (0, w % 2)), mode="edge")


def _pool2(a):
    return 0.25 * (a[:, 0::2, 0::2] + a[:, 1::2, 0::2] + a[:, 0::2, 1::2] + a[:, 1::2, 1::2])


def _up2(a, shape):
    up = np.repeat(np.repeat(a, 2, axis=-2), 2, axis=-1)
    return up[..., : shape[-2], : shape[-1]]


def hyper_encode(y) -> HyperLatent:
    """Mean bank: 2x2 average of ``y``; scale bank: 2x2 average of ``|y - mean|``.

    Odd latent sizes are edge-replicated to even first.
    """
    y = np.asarray(y, dtype=np.float64)
    p = _pad_even(y)
    mean = _pool2(p)
    scale = _pool2(np.abs(p - _up2(mean, p.shape)))
    return HyperLatent(mean, scale, y.shape)


def _round_half_away(a):
    a = np.asarray(a, dtype=np.float64)
    return (np.sign(a) * np.floor(np.abs(a) + 0.5)).astype(np.int64)


def quantize_hyper(z: HyperLatent) -> HyperLatent:
    return HyperLatent(_round_half_away(z.mean), _round_half_away(z.scale), z.latent_shape)


def predict_mu_sigma(z_hat: HyperLatent, sigma_gain: GainVector | None = None):
    """Prediction ``mu`` and entropy scale ``sigma`` at latent resolution.

    ``sigma`` is the upsampled scale bank times the sigma gain, clamped and
    snapped onto the entropy coder's grid.
    """
    shape = z_hat.latent_shape
    mu = _up2(np.asarray(z_hat.mean, dtype=np.float64), shape)
    sigma = _up2(np.asarray(z_hat.scale, dtype=np.float64), shape)
    if sigma_gain is not None:
        sigma = apply_sigma_gain(sigma, sigma_gain)
    return mu, sigma_from_index(sigma_index(sigma))


# --- hyper stream --------------------------------------------------------------


def _dpcm(a):
    """Left-neighbour differences, first column against the cell above."""
    d = a.copy()
    d[:, :, 1:] = a[:, :, 1:] - a[:, :, :-1]
    d[:, 1:, 0] = a[:, 1:, 0] - a[:, :-1, 0]
    return d


def _undpcm(d):
    a = d.copy()
    a[:, :, 0] = np.cumsum(a[:, :, 0], axis=1)
    return np.cumsum(a, axis=2)


def _fit_index(symbols) -> int:
    rms = float(np.sqrt(np.mean(np.square(symbols, dtype=np.float64))))
    return sigma_index(max(rms, SIGMA_MIN))


def _code_bank(enc, symbols, ledger_cells, ledger, side_bits=0):
    """One channel of one bank: 6-bit sigma index, then the symbols under that Laplacian."""
    k = _fit_index(symbols)
    enc.encode_bits(k, _SIGMA_BITS)
    model = QuantizedLaplacian.from_index(k)
    spent = [model.encode(enc, s) for s in symbols.reshape(-1).tolist()]
    overhead = (_SIGMA_BITS + side_bits) / symbols.size
    ledger.add_many(ledger_cells, np.asarray(spent) + overhead)


def _decode_bank(dec, count):
    model = QuantizedLaplacian.from_index(dec.decode_bits(_SIGMA_BITS))
    return np.array([model.decode(dec) for _ in range(count)], dtype=np.int64)


def _code_hyper(z_hat: HyperLatent, ledger: BitLedger) -> bytes:
    """Factorised hyper prior with per-channel parameters sent up front.

    Mean bank: DPCM residuals. Scale bank: values minus the channel's median,
    the median itself sent as Exp-Golomb bits. Side information is charged
    evenly to the channel's cells.
    """
    c, h, w = z_hat.mean.shape
    enc = RangeEncoder()
    mean_sym = _dpcm(z_hat.mean)
    for ch in range(c):
        cells = np.arange(h * w) + ch * h * w
        _code_bank(enc, mean_sym[ch], cells, ledger)
        offset = int(np.floor(np.median(z_hat.scale[ch])))
        side = put_expgolomb(enc, offset)
        _code_bank(enc, z_hat.scale[ch] - offset, cells, ledger, side)
    return enc.finish()


def _decode_hyper(data: bytes, channels: int, shape, latent_shape) -> HyperLatent:
    h, w = shape
    dec = RangeDecoder(data)
    mean = np.zeros((channels, h, w), dtype=np.int64)
    scale = np.zeros((channels, h, w), dtype=np.int64)
    for ch in range(channels):
        mean[ch] = _decode_bank(dec, h * w).reshape(h, w)
        offset = get_expgolomb(dec)
        scale[ch] = _decode_bank(dec, h * w).reshape(h, w) + offset
    if scale.min() < 0:
        raise DecodeError("negative hyper scale decoded")
    return HyperLatent(_undpcm(mean), scale, latent_shape)


# --- residual stream -----------------------------------------------------------


def code_residual(y, mu, sigma, gain: GainVector, steps=None, ledger: BitLedger | None = None):
    """Quantise and range-code the residual ``y - mu``.

    The residual is scaled by the channel gain and, if given, the per-cell
    quality step before rounding half away from zero. ``sigma`` is used as
    given apart from the quality step; :func:`predict_mu_sigma` is where the
    sigma gain is applied.

    Returns ``(stream, symbols, reconstructed y)``.
    """
    y = np.asarray(y, dtype=np.float64)
    r = apply_gain(y - mu, gain)
    sig = np.asarray(sigma, dtype=np.float64)
    if steps is not None:
        r = r * steps
        sig = sig * steps
    symbols = _round_half_away(r)
    idx = sigma_index(sig)
    ledger = ledger if ledger is not None else BitLedger(y.shape)
    enc = RangeEncoder()
    models = [QuantizedLaplacian.from_index(k) for k in range(64)]
    spent = [models[k].encode(enc, s) for s, k in zip(symbols.reshape(-1).tolist(), idx.reshape(-1).tolist())]
    ledger.add_many(np.arange(symbols.size), spent)
    return enc.finish(), symbols, _dequantize(symbols, mu, gain, steps)


def decode_residual(data: bytes, mu, sigma, gain: GainVector, steps=None):
    sig = np.asarray(sigma, dtype=np.float64)
    if steps is not None:
        sig = sig * steps
    idx = sigma_index(sig).reshape(-1).tolist()
    models = [QuantizedLaplacian.from_index(k) for k in range(64)]
    dec = RangeDecoder(data)
    symbols = np.array([models[k].decode(dec) for k in idx], dtype=np.int64).reshape(np.shape(mu))
    return symbols, _dequantize(symbols, mu, gain, steps)


def _dequantize(symbols, mu, gain, steps):
    r = symbols.astype(np.float64)
    if steps is not None:
        r = r / steps
    return mu + apply_gain(r, gain, inverse=True)


# --- container -----------------------------------------------------------------


@dataclass
class EncodeLedger:
    """Per-cell ideal bits of each stream; latent grids for residuals, hyper grids for hyper."""

    y_hyper: BitLedger
    y_residual: BitLedger
    uv_hyper: BitLedger
    uv_residual: BitLedger


@dataclass
class Bitstream:
    width: int
    height: int
    orig_width: int
    orig_height: int
    c_y: int
    c_uv: int
    beta_fixed: int
    flags: int
    segments: dict
    ledger: EncodeLedger | None = field(default=None, compare=False, repr=False)

    HEADER_BYTES = _HEADER.size + 4 * len(_SEGMENTS)

    @property
    def beta(self) -> float:
        return self.beta_fixed / 65536.0

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(
            MAGIC,
            VERSION,
            self.flags,
            self.width,
            self.height,
            self.orig_width,
            self.orig_height,
            self.c_y,
            self.c_uv,
            self.beta_fixed,
        )
        body = b"".join(struct.pack("<I", len(self.segments[k])) + self.segments[k] for k in _SEGMENTS)
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _HEADER.size:
            raise ContainerError("container shorter than its %d-byte header" % _HEADER.size)
        magic, version, flags, w, h, ow, oh, c_y, c_uv, beta_fixed = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ContainerError("bad magic %r" % magic)
        if version != VERSION:
            raise ContainerError("unsupported container version %d (expected %d)" % (version, VERSION))
        if w % PAD_MULTIPLE or h % PAD_MULTIPLE or not (0 < ow <= w and 0 < oh <= h):
            raise ContainerError("inconsistent picture size %dx%d (original %dx%d)" % (w, h, ow, oh))
        if not 0 < c_uv < c_y <= BLOCK * BLOCK:
            raise ContainerError("bad channel counts c_y=%d c_uv=%d" % (c_y, c_uv))
        if beta_fixed == 0:
            raise ContainerError("beta is zero")
        pos = _HEADER.size
        segments = {}
        for name in _SEGMENTS:
            if pos + 4 > len(data):
                raise ContainerError("truncated before %s segment length" % name)
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise ContainerError("%s segment truncated: %d of %d bytes" % (name, len(data) - pos, n))
            segments[name] = bytes(data[pos:pos + n])
            pos += n
        if pos != len(data):
            raise ContainerError("%d trailing bytes after last segment" % (len(data) - pos))
        return cls(w, h, ow, oh, c_y, c_uv, beta_fixed, flags, segments)

    @property
    def total_bits(self) -> int:
        return 8 * (self.HEADER_BYTES + sum(len(s) for s in self.segments.values()))

    @property
    def bpp(self) -> float:
        return self.total_bits / (self.orig_width * self.orig_height)

    def segment_bits(self) -> dict:
        return {k: 8 * len(self.segments[k]) for k in _SEGMENTS}

    @property
    def qmap_fraction(self) -> float:
        return 8 * len(self.segments["qmap"]) / self.total_bits


@dataclass
class EncodeResult:
    bitstream: Bitstream
    original: PlanarImage  # padded YUV420 input
    reconstruction: PlanarImage  # padded YUV420 output
    y_latent: np.ndarray
    y_symbols: np.ndarray

    @property
    def ledger(self) -> EncodeLedger:
        return self.bitstream.ledger


def prepare_image(image) -> PlanarImage:
    """YUV 4:2:0 padded to a multiple of 32 (no-op if already so)."""
    if image.colorspace is ColorSpace.RGB:
        image = rgb_to_yuv420(image)
    elif image.colorspace is not ColorSpace.YUV420:
        raise ValueError("codec takes RGB or YUV420 input, got %s" % image.colorspace.value)
    return pad_replicate(image, PAD_MULTIPLE)


def _to_plane(a) -> np.ndarray:
    return np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)


def _chroma_aux(y_plane_u8, chroma_grid):
    """Per chroma-block luma DC, centred at 128, from the reconstructed luma."""
    y = y_plane_u8.astype(np.float64)
    ds = 0.25 * (y[0::2, 0::2] + y[1::2, 0::2] + y[0::2, 1::2] + y[1::2, 1::2])
    h, w = chroma_grid
    means = ds.reshape(h, BLOCK, w, BLOCK).mean(axis=(1, 3))
    return BLOCK * (means - 128.0) / LATENT_STEP


def _apply_aux(latent, aux, c_uv, sign):
    out = latent.copy()
    out[0] += sign * aux
    out[c_uv] += sign * aux
    return out


def _flags(config: CodecConfig) -> int:
    flags = 0
    if config.qmap is not None:
        flags |= FLAG_QMAP
    if config.interp == "paper-literal":
        flags |= FLAG_PAPER_INTERP
    if config.qpred == "avg":
        flags |= FLAG_QPRED_AVG
    if config.gain_unit_y is not None or config.gain_unit_uv is not None:
        flags |= FLAG_CUSTOM_GAIN
    if not config.sigma_gain:
        flags |= FLAG_NO_SIGMA_GAIN
    return flags


def _component_steps(config: CodecConfig, grid_y):
    if config.qmap is None:
        return None, None
    if config.qmap.shape != grid_y:
        raise ValueError("quality map %r does not match latent grid %r" % (config.qmap.shape, grid_y))
    return config.qmap.steps(), downsample_qmap(config.qmap).steps()


def _code_component(latent, gain, steps, use_sigma_gain, hyper_ledger, residual_ledger):
    z_hat = quantize_hyper(hyper_encode(latent))
    hyper_bytes = _code_hyper(z_hat, hyper_ledger)
    mu, sigma = predict_mu_sigma(z_hat, gain if use_sigma_gain else None)
    res_bytes, symbols, y_hat = code_residual(latent, mu, sigma, gain, steps, ledger=residual_ledger)
    return hyper_bytes, res_bytes, symbols, y_hat


def _decode_component(hyper_bytes, res_bytes, channels, latent_shape, gain, steps, use_sigma_gain):
    hshape = ((latent_shape[0] + 1) // 2, (latent_shape[1] + 1) // 2)
    z_hat = _decode_hyper(hyper_bytes, channels, hshape, (channels,) + tuple(latent_shape))
    mu, sigma = predict_mu_sigma(z_hat, gain if use_sigma_gain else None)
    _, y_hat = decode_residual(res_bytes, mu, sigma, gain, steps)
    return y_hat


def encode_detailed(image, config: CodecConfig) -> EncodeResult:
    """Encode and keep the ledgers, latents and local reconstruction."""
    yuv = prepare_image(image)
    beta = quantize_beta(config.beta)
    gain_y, gain_uv = config.gains(beta)
    y_plane, u_plane, v_plane = yuv.as_float()
    grid_y = (yuv.height // BLOCK, yuv.width // BLOCK)
    grid_uv = (yuv.height // (2 * BLOCK), yuv.width // (2 * BLOCK))
    steps_y, steps_uv = _component_steps(config, grid_y)

    ledger = EncodeLedger(
        BitLedger((config.c_y,) + tuple((n + 1) // 2 for n in grid_y)),
        BitLedger((config.c_y,) + grid_y),
        BitLedger((2 * config.c_uv,) + tuple((n + 1) // 2 for n in grid_uv)),
        BitLedger((2 * config.c_uv,) + grid_uv),
    )

    y_lat = analysis(y_plane - LEVEL_SHIFT, config.c_y) / LATENT_STEP
    y_hyper, y_res, y_sym, y_hat = _code_component(
        y_lat, gain_y, steps_y, config.sigma_gain, ledger.y_hyper, ledger.y_residual
    )
    y_rec = _to_plane(LATENT_STEP * synthesis(y_hat)[0] + LEVEL_SHIFT)

    aux = _chroma_aux(y_rec, grid_uv)
    uv_lat = _apply_aux(analysis([u_plane - LEVEL_SHIFT, v_plane - LEVEL_SHIFT], config.c_uv) / LATENT_STEP, aux, config.c_uv, -1.0)
    uv_hyper, uv_res, _, uv_hat = _code_component(
        uv_lat, gain_uv, steps_uv, config.sigma_gain, ledger.uv_hyper, ledger.uv_residual
    )
    u_rec, v_rec = (p + LEVEL_SHIFT for p in synthesis(LATENT_STEP * _apply_aux(uv_hat, aux, config.c_uv, 1.0), 2))

    segments = {
        "qmap": b"" if config.qmap is None else encode_qmap(config.qmap, config.qpred),
        "y_hyper": y_hyper,
        "y_residual": y_res,
        "uv_hyper": uv_hyper,
        "uv_residual": uv_res,
    }
    bs = Bitstream(
        yuv.width,
        yuv.height,
        yuv.orig_width,
        yuv.orig_height,
        config.c_y,
        config.c_uv,
        int(round(beta * 65536)),
        _flags(config),
        segments,
        ledger,
    )
    rec = PlanarImage(
        yuv.width, yuv.height, ColorSpace.YUV420,
        (y_rec, _to_plane(u_rec), _to_plane(v_rec)), yuv.orig_width, yuv.orig_height,
    )
    return EncodeResult(bs, yuv, rec, y_lat, y_sym)


def encode(image, config: CodecConfig) -> Bitstream:
    return encode_detailed(image, config).bitstream


def decode_detailed(bitstream, gain_unit_y: GainUnit | None = None, gain_unit_uv: GainUnit | None = None) -> PlanarImage:
    """Decode to the padded YUV420 picture (original size kept as metadata)."""
    if isinstance(bitstream, (bytes, bytearray)):
        bitstream = Bitstream.from_bytes(bytes(bitstream))
    bs = bitstream
    flags = bs.flags
    if flags & FLAG_CUSTOM_GAIN and gain_unit_y is None and gain_unit_uv is None:
        raise ContainerError("stream was coded with a custom gain unit; pass it to the decoder")
    config = CodecConfig(
        c_y=bs.c_y,
        c_uv=bs.c_uv,
        beta=bs.beta,
        qpred="avg" if flags & FLAG_QPRED_AVG else "paper",
        interp="paper-literal" if flags & FLAG_PAPER_INTERP else "linear",
        sigma_gain=not flags & FLAG_NO_SIGMA_GAIN,
        gain_unit_y=gain_unit_y,
        gain_unit_uv=gain_unit_uv,
    )
    gain_y, gain_uv = config.gains(bs.beta)
    grid_y = (bs.height // BLOCK, bs.width // BLOCK)
    grid_uv = (bs.height // (2 * BLOCK), bs.width // (2 * BLOCK))
    if flags & FLAG_QMAP:
        qmap = decode_qmap(bs.segments["qmap"], grid_y[0], grid_y[1], config.qpred)
        config = replace(config, qmap=qmap)
    steps_y, steps_uv = _component_steps(config, grid_y)

    y_hat = _decode_component(
        bs.segments["y_hyper"], bs.segments["y_residual"], bs.c_y, grid_y, gain_y, steps_y, config.sigma_gain
    )
    y_rec = _to_plane(LATENT_STEP * synthesis(y_hat)[0] + LEVEL_SHIFT)
    aux = _chroma_aux(y_rec, grid_uv)
    uv_hat = _decode_component(
        bs.segments["uv_hyper"], bs.segments["uv_residual"], 2 * bs.c_uv, grid_uv, gain_uv, steps_uv,
        config.sigma_gain,
    )
    u_rec, v_rec = (p + LEVEL_SHIFT for p in synthesis(LATENT_STEP * _apply_aux(uv_hat, aux, bs.c_uv, 1.0), 2))
    return PlanarImage(
        bs.width, bs.height, ColorSpace.YUV420,
        (y_rec, _to_plane(u_rec), _to_plane(v_rec)), bs.orig_width, bs.orig_height,
    )


def decode(bitstream, gain_unit_y: GainUnit | None = None, gain_unit_uv: GainUnit | None = None) -> PlanarImage:
    """Decode and crop to the original picture size (YUV420)."""
    return crop(decode_detailed(bitstream, gain_unit_y, gain_unit_uv))


# --- analytics -----------------------------------------------------------------


def bits_per_block(ledger: EncodeLedger):
    """Luma bits per 16x16 block: residual bits over all channels plus an equal
    quarter of each covering hyper cell's bits."""
    from .bdm import BitDistributionMap

    res = ledger.y_residual.bits.sum(axis=0)
    hyp = ledger.y_hyper.bits.sum(axis=0) / 4.0
    values = res + _up2(hyp, res.shape)
    rows, cols = res.shape
    return BitDistributionMap.uniform(values, cols * BLOCK, rows * BLOCK, BLOCK)


def block_costs(image, config: CodecConfig, index: int | None = None):
    """Per latent cell: luma residual bits and luma SSE of the 16x16 block.

    With ``index`` set, a constant quality map of that index replaces the
    config's map.
    """
    yuv = prepare_image(image)
    if index is not None:
        grid = (yuv.height // BLOCK, yuv.width // BLOCK)
        config = replace(config, qmap=QualityIndexMap.constant(grid[0], grid[1], index))
    result = encode_detailed(yuv, config)
    bits = result.ledger.y_residual.bits.sum(axis=0)
    err = (result.original.planes[0].astype(np.float64) - result.reconstruction.planes[0]) ** 2
    h, w = err.shape
    sse = err.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).sum(axis=(1, 3))
    return bits, sse


def psnr_yuv(original: PlanarImage, decoded: PlanarImage) -> dict:
    """PSNR of each plane after cropping both pictures to the original size."""
    a = crop(prepare_image(original) if original.colorspace is ColorSpace.RGB else original)
    b = crop(decoded)
    return {name: psnr(pa, pb) for name, pa, pb in zip("YUV", a.planes, b.planes)}
