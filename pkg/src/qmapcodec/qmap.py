"""Spatial quality index maps.

One integer index per 16x16 picture block (one latent cell). Index ``Q``
scales the latent by ``2**(Q/4)`` before rounding, so positive indices buy
finer quantisation and more bits. Maps are signalled as left/top predicted
deltas through an adaptive range-coded model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .entropy import AdaptiveModel, RangeDecoder, RangeEncoder
from .imagecore import block_variance_map

__all__ = [
    "QualityIndexMap",
    "q_step",
    "q_steps",
    "predict",
    "encode_qmap",
    "decode_qmap",
    "apply_qmap",
    "qmap_from_roi",
    "qmap_from_bdm",
    "qmap_from_variance",
    "qmap_rd_optimize",
    "downsample_qmap",
    "INDEX_MIN",
    "INDEX_MAX",
    "TABLE_MIN",
    "TABLE_MAX",
    "QPRED_MODES",
]

# Table range; the wider in-memory range lets ROI maps be combined with offsets.
TABLE_MIN, TABLE_MAX = -8, 8
INDEX_MIN, INDEX_MAX = -16, 16
QPRED_MODES = ("paper", "avg")

_DELTA_SPAN = 2 * (INDEX_MAX - INDEX_MIN)  # largest |Q - pred| is 32
_DELTA_ALPHABET = 2 * _DELTA_SPAN + 1
_QMAP_INCREMENT = 128


class QualityIndexMap:
    """Integer grid of quality indices, ``rows x cols`` latent cells."""

    def __init__(self, q, lo: int = INDEX_MIN, hi: int = INDEX_MAX):
        arr = np.asarray(q)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("quality map must be a non-empty 2-D grid")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.array_equal(arr, np.round(arr)):
                raise ValueError("quality indices must be integers")
        arr = arr.astype(np.int64)
        if arr.min() < lo or arr.max() > hi:
            raise ValueError("quality indices must lie in [%d, %d], got [%d, %d]" % (lo, hi, arr.min(), arr.max()))
        arr.setflags(write=False)
        self.q = arr

    @classmethod
    def constant(cls, rows: int, cols: int, value: int) -> "QualityIndexMap":
        return cls(np.full((rows, cols), value, dtype=np.int64))

    @property
    def shape(self):
        return self.q.shape

    @property
    def rows(self) -> int:
        return self.q.shape[0]

    @property
    def cols(self) -> int:
        return self.q.shape[1]

    def steps(self) -> np.ndarray:
        return q_steps(self.q)

    def is_zero(self) -> bool:
        return not self.q.any()

    def __eq__(self, other):
        return isinstance(other, QualityIndexMap) and np.array_equal(self.q, other.q)

    def __repr__(self):
        return "QualityIndexMap(%dx%d, range [%d, %d])" % (self.rows, self.cols, self.q.min(), self.q.max())

    # file forms

    def to_json(self) -> str:
        return json.dumps({"w": self.cols, "h": self.rows, "q": self.q.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "QualityIndexMap":
        obj = json.loads(text)
        q = np.asarray(obj["q"], dtype=np.int64)
        if q.shape != (obj["h"], obj["w"]):
            raise ValueError("JSON map declares %dx%d but holds %r" % (obj["w"], obj["h"], q.shape))
        return cls(q)

    def to_pgm_array(self) -> np.ndarray:
        """Grey levels ``Q + 8`` (0..16) for viewing; printed table range only."""
        if self.q.min() < TABLE_MIN or self.q.max() > TABLE_MAX:
            raise ValueError("PGM form only holds indices in [-8, 8]")
        return (self.q + 8).astype(np.uint8)

    @classmethod
    def from_pgm_array(cls, arr) -> "QualityIndexMap":
        return cls(np.asarray(arr, dtype=np.int64) - 8, TABLE_MIN, TABLE_MAX)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() in (".pgm", ".pnm"):
            from .imagecore import write_pnm

            write_pnm(path, self.to_pgm_array())
        else:
            path.write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "QualityIndexMap":
        path = Path(path)
        if path.suffix.lower() in (".pgm", ".pnm"):
            from .imagecore import read_pnm

            return cls.from_pgm_array(read_pnm(path).planes[0])
        return cls.from_json(path.read_text())


def q_step(index: int) -> float:
    """Quantisation step ``2**(index/4)``."""
    if int(index) != index or not INDEX_MIN <= index <= INDEX_MAX:
        raise ValueError("quality index %r outside [%d, %d]" % (index, INDEX_MIN, INDEX_MAX))
    return 2.0 ** (int(index) / 4.0)


def q_steps(indices) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.size and (idx.min() < INDEX_MIN or idx.max() > INDEX_MAX):
        raise ValueError("quality index outside [%d, %d]" % (INDEX_MIN, INDEX_MAX))
    return np.exp2(idx.astype(np.float64) / 4.0)


def _half(n: int) -> int:
    # division by two truncating toward zero
    return n // 2 if n >= 0 else -((-n) // 2)


def predict(q, i: int, j: int, mode: str = "paper") -> int:
    """Prediction of ``Q[i, j]`` from its left and top neighbours (0 off-grid).

    ``paper``: ``(left - top) / 2``; ``avg``: ``(left + top) / 2``. Both
    truncate toward zero.
    """
    q = q.q if isinstance(q, QualityIndexMap) else q
    left = int(q[i, j - 1]) if j > 0 else 0
    top = int(q[i - 1, j]) if i > 0 else 0
    if mode == "paper":
        return _half(left - top)
    if mode == "avg":
        return _half(left + top)
    raise ValueError("unknown qpred mode %r" % mode)


def _zigzag(d: int) -> int:
    return 2 * d if d >= 0 else -2 * d - 1


def _unzigzag(z: int) -> int:
    return z // 2 if z % 2 == 0 else -(z + 1) // 2


def _qmap_model() -> AdaptiveModel:
    return AdaptiveModel(_DELTA_ALPHABET, increment=_QMAP_INCREMENT)


def qmap_deltas(qmap: QualityIndexMap, mode: str = "paper") -> np.ndarray:
    q = qmap.q
    out = np.zeros_like(q)
    for i in range(q.shape[0]):
        for j in range(q.shape[1]):
            out[i, j] = q[i, j] - predict(q, i, j, mode)
    return out


def encode_qmap(qmap: QualityIndexMap, mode: str = "paper") -> bytes:
    """Raster-scan the prediction residuals into an adaptive range-coded stream."""
    model = _qmap_model()
    enc = RangeEncoder()
    for d in qmap_deltas(qmap, mode).reshape(-1):
        model.encode(enc, _zigzag(int(d)))
    return enc.finish()


def decode_qmap(stream: bytes, rows: int, cols: int, mode: str = "paper") -> QualityIndexMap:
    model = _qmap_model()
    dec = RangeDecoder(stream)
    q = np.zeros((rows, cols), dtype=np.int64)
    for i in range(rows):
        for j in range(cols):
            q[i, j] = _unzigzag(model.decode(dec)) + predict(q, i, j, mode)
    return QualityIndexMap(q)


def apply_qmap(latent, qmap: QualityIndexMap, direction: str = "forward") -> np.ndarray:
    """Scale every channel's cell ``(i, j)`` by ``q_step(Q[i, j])`` (inverse divides)."""
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape[-2:] != qmap.shape:
        raise ValueError("latent grid %r does not match quality map %r" % (latent.shape[-2:], qmap.shape))
    steps = qmap.steps()
    if direction == "forward":
        return latent * steps
    if direction == "inverse":
        return latent / steps
    raise ValueError("direction must be 'forward' or 'inverse'")


def downsample_qmap(qmap: QualityIndexMap) -> QualityIndexMap:
    """Half-resolution map for the chroma latent: rounded mean of each 2x2 group."""
    q = qmap.q
    h, w = q.shape
    p = np.pad(q, ((0, h % 2), (0, w % 2)), mode="edge")
    s = p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2]
    return QualityIndexMap(np.floor(s / 4.0 + 0.5).astype(np.int64))


# --- generators ----------------------------------------------------------------


def qmap_from_roi(mask, hi: int = 6, lo: int = -6, block: int = 16) -> QualityIndexMap:
    """``hi`` for blocks with at least half their pixels in the mask, ``lo`` elsewhere."""
    m = np.asarray(mask) != 0
    h, w = m.shape
    if h % block or w % block:
        raise ValueError("mask %dx%d is not padded to a multiple of %d" % (w, h, block))
    counts = m.reshape(h // block, block, w // block, block).sum(axis=(1, 3))
    return QualityIndexMap(np.where(2 * counts >= block * block, hi, lo))


def qmap_from_bdm(bdm) -> QualityIndexMap:
    """Five-level map from a latent-resolution bit distribution map.

    Relative to the map mean ``m``: ``[0, m) -> -1``, ``[m, 1.5m) -> 0``,
    ``[1.5m, 2.5m) -> 1``, ``[2.5m, 4m) -> 2``, ``[4m, inf) -> 3``.
    """
    values = np.asarray(getattr(bdm, "values", bdm), dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty bit distribution map")
    if values.ndim == 1:
        values = values[None, :]
    m = values.mean()
    if m == 0:
        return QualityIndexMap(np.zeros(values.shape, dtype=np.int64))
    q = np.full(values.shape, -1, dtype=np.int64)
    for bound, index in ((1.0, 0), (1.5, 1), (2.5, 2), (4.0, 3)):
        q[values >= bound * m] = index
    return QualityIndexMap(q)


def qmap_from_variance(plane, levels: int = 5, index_range=(-4, 0), block: int = 16) -> QualityIndexMap:
    """Quantise per-block luminance variance into ``levels`` equal-count bands.

    The lowest-variance band gets ``index_range[0]``, the highest
    ``index_range[1]``; bands are split at the 20/40/60/80th percentiles for
    five levels.
    """
    lo, hi = index_range
    var = block_variance_map(plane, block)
    cuts = np.percentile(var, np.linspace(0, 100, levels + 1)[1:-1])
    level = (var[..., None] > cuts).sum(axis=-1)
    index = lo + np.floor(level * (hi - lo) / (levels - 1) + 0.5).astype(np.int64)
    return QualityIndexMap(index)


def qmap_rd_optimize(image, config, beta: float, candidates=range(-8, 9)) -> QualityIndexMap:
    """Per-block choice of index minimising ``bits + beta * SSE``.

    Rate is the block's ideal residual code length, distortion the SSE of its
    reconstructed 16x16 luma block. Ties go to index 0, then to the smaller
    magnitude, then to the smaller index.
    """
    from .codec import block_costs, prepare_image

    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("no candidate indices")
    for c in candidates:
        q_step(c)
    prepared = prepare_image(image)
    costs = []
    for c in candidates:
        # Residual cells are coded independently with static models, so a
        # constant map gives each block exactly the cost it has when every
        # other block is held at index 0.
        bits, sse = block_costs(prepared, config, c)
        costs.append(bits + beta * sse)
    costs = np.stack(costs)
    order = sorted(range(len(candidates)), key=lambda k: (candidates[k] != 0, abs(candidates[k]), candidates[k]))
    best = np.full(costs.shape[1:], order[0])
    best_cost = costs[order[0]].copy()
    for k in order[1:]:
        better = costs[k] < best_cost
        best[better] = k
        best_cost[better] = costs[k][better]
    return QualityIndexMap(np.asarray(candidates)[best])
