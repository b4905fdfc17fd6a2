"""Range coding with adaptive and quantised-Laplacian models.

The coder is a 32-bit range coder with byte-wise renormalisation and a
one-byte carry cache (the LZMA arrangement). Frequencies are integers with a
total of at most ``2**16`` so ``range // total`` never drops below 256.

Every ``encode`` call returns the ideal code length ``-log2(freq/total)`` of
what it just wrote, which is what :class:`BitLedger` accumulates.
"""

from __future__ import annotations

import copy
import math
from bisect import bisect_right
from functools import lru_cache
from itertools import accumulate

import numpy as np

__all__ = [
    "DecodeError",
    "RangeEncoder",
    "RangeDecoder",
    "AdaptiveModel",
    "QuantizedLaplacian",
    "BitLedger",
    "encode_symbols",
    "decode_symbols",
    "put_expgolomb",
    "get_expgolomb",
    "laplacian_bin_prob",
    "sigma_index",
    "sigma_from_index",
    "SIGMA_MIN",
    "SIGMA_MAX",
    "SIGMA_LEVELS",
    "LAPLACE_CLIP",
    "PROB_BITS",
]

PROB_BITS = 16
PROB_TOTAL = 1 << PROB_BITS
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF

SIGMA_MIN = 0.05
SIGMA_MAX = 256.0
SIGMA_LEVELS = 64
LAPLACE_CLIP = 255

_SIGMA_GRID = SIGMA_MIN * (SIGMA_MAX / SIGMA_MIN) ** (np.arange(SIGMA_LEVELS) / (SIGMA_LEVELS - 1))
_LOG_MIN = math.log(SIGMA_MIN)
_LOG_STEP = math.log(SIGMA_MAX / SIGMA_MIN) / (SIGMA_LEVELS - 1)


class DecodeError(ValueError):
    """The byte stream ended early or is otherwise undecodable."""


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        # the first byte out of the cache is always zero and is not stored
        self._skip = True

    def encode(self, cum: int, freq: int, total: int) -> None:
        r = self.range // total
        self.low += r * cum
        self.range = r * freq
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def encode_bits(self, value: int, nbits: int) -> None:
        for k in range(nbits - 1, -1, -1):
            self.encode((value >> k) & 1, 1, 2)

    def _shift_low(self) -> None:
        low = self.low
        if (low & _MASK32) < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            temp = self._cache
            while True:
                if self._skip:
                    self._skip = False
                else:
                    self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self.range = _MASK32
        self.code = 0
        self._r = 1
        for _ in range(4):
            self.code = (self.code << 8) | self._next_byte()

    def _next_byte(self) -> int:
        if self._pos >= len(self._data):
            raise DecodeError("range-coded stream truncated at byte %d" % self._pos)
        b = self._data[self._pos]
        self._pos += 1
        return b

    def target(self, total: int) -> int:
        """Cumulative-frequency slot of the next symbol."""
        self._r = self.range // total
        v = self.code // self._r
        return v if v < total else total - 1

    def consume(self, cum: int, freq: int, total: int) -> None:
        r = self._r
        self.code -= r * cum
        self.range = r * freq
        while self.range < _TOP:
            self.code = (self.code << 8) | self._next_byte()
            self.range <<= 8

    def decode_bits(self, nbits: int) -> int:
        value = 0
        for _ in range(nbits):
            bit = self.target(2)
            self.consume(bit, 1, 2)
            value = (value << 1) | bit
        return value

    @property
    def bytes_consumed(self) -> int:
        return self._pos


def put_expgolomb(enc: RangeEncoder, n: int) -> int:
    """Order-0 Exp-Golomb code of ``n >= 0`` as equiprobable bits; returns bit count."""
    k = (n + 1).bit_length() - 1
    enc.encode_bits(0, k)
    enc.encode_bits(n + 1, k + 1)
    return 2 * k + 1


def get_expgolomb(dec: RangeDecoder) -> int:
    k = 0
    while dec.decode_bits(1) == 0:
        k += 1
        if k > 40:
            raise DecodeError("Exp-Golomb prefix too long")
    return ((1 << k) | dec.decode_bits(k)) - 1


class AdaptiveModel:
    """Frequency-count model over ``0 .. size-1``.

    Counts start at 1, grow by ``increment`` per coded symbol and are halved
    whenever the total would exceed ``limit``. With ``escape=True`` the last
    symbol is an escape: any value ``>= size - 1`` is coded as escape plus an
    Exp-Golomb suffix. ``increment=0`` gives a static uniform model.
    """

    def __init__(self, size: int, increment: int = 32, limit: int = PROB_TOTAL, escape: bool = False):
        if size < 1:
            raise ValueError("alphabet size must be positive")
        if size > limit:
            raise ValueError("alphabet larger than the frequency limit")
        self.size = size
        self.increment = increment
        self.limit = limit
        self.escape = escape
        self.freq = [1] * size
        self.total = size

    def _interval(self, symbol: int):
        return sum(self.freq[:symbol]), self.freq[symbol]

    def _update(self, symbol: int) -> None:
        if not self.increment:
            return
        if self.total + self.increment > self.limit:
            self.freq = [(f + 1) >> 1 for f in self.freq]
            self.total = sum(self.freq)
        self.freq[symbol] += self.increment
        self.total += self.increment

    def encode(self, enc: RangeEncoder, value: int) -> float:
        value = int(value)
        if value < 0:
            raise ValueError("symbol %d outside alphabet [0, %d)" % (value, self.size))
        extra = 0
        if self.escape and value >= self.size - 1:
            symbol = self.size - 1
        elif value >= self.size:
            raise ValueError("symbol %d outside alphabet [0, %d)" % (value, self.size))
        else:
            symbol = value
        cum, freq = self._interval(symbol)
        total = self.total
        enc.encode(cum, freq, total)
        bits = -math.log2(freq / total)
        self._update(symbol)
        if self.escape and symbol == self.size - 1:
            extra = put_expgolomb(enc, value - symbol)
        return bits + extra

    def decode(self, dec: RangeDecoder) -> int:
        total = self.total
        t = dec.target(total)
        cum = 0
        for symbol, f in enumerate(self.freq):
            if cum + f > t:
                break
            cum += f
        dec.consume(cum, f, total)
        self._update(symbol)
        if self.escape and symbol == self.size - 1:
            return symbol + get_expgolomb(dec)
        return symbol


def laplacian_bin_prob(value: int, sigma: float) -> float:
    """P(value - 1/2 < X <= value + 1/2) for zero-mean Laplace X with std ``sigma``.

    Renormalised over the clipped alphabet ``[-255, 255]``; zero outside it.
    """
    if abs(value) > LAPLACE_CLIP:
        return 0.0
    b = sigma / math.sqrt(2.0)
    return _laplace_mass(abs(value), b) / (1.0 - math.exp(-(LAPLACE_CLIP + 0.5) / b))


def _laplace_mass(v, b):
    if np.ndim(v) == 0:
        if v == 0:
            return 1.0 - math.exp(-0.5 / b)
        return 0.5 * (math.exp(-(v - 0.5) / b) - math.exp(-(v + 0.5) / b))
    v = np.abs(np.asarray(v, dtype=np.float64))
    out = 0.5 * (np.exp(-(v - 0.5) / b) - np.exp(-(v + 0.5) / b))
    return np.where(v == 0, 1.0 - math.exp(-0.5 / b), out)


def sigma_index(sigma):
    """Nearest point of the 64-level geometric sigma grid (clamped)."""
    s = np.clip(np.asarray(sigma, dtype=np.float64), SIGMA_MIN, SIGMA_MAX)
    k = np.floor((np.log(s) - _LOG_MIN) / _LOG_STEP + 0.5).astype(np.int64)
    k = np.clip(k, 0, SIGMA_LEVELS - 1)
    return int(k) if k.ndim == 0 else k


def sigma_from_index(k):
    return _SIGMA_GRID[k]


@lru_cache(maxsize=None)
def _laplace_table(k: int):
    b = float(_SIGMA_GRID[k]) / math.sqrt(2.0)
    values = np.arange(-LAPLACE_CLIP, LAPLACE_CLIP + 1)
    tail = math.exp(-(LAPLACE_CLIP + 0.5) / b)
    probs = np.append(_laplace_mass(values, b), tail)
    n = probs.size
    freq = 1 + np.floor(probs / probs.sum() * (PROB_TOTAL - n)).astype(np.int64)
    freq[np.argmax(freq)] += PROB_TOTAL - int(freq.sum())
    freq = [int(f) for f in freq]
    cum = [0] + list(accumulate(freq))
    bits = [-math.log2(f / PROB_TOTAL) for f in freq]
    return freq, cum, bits


class QuantizedLaplacian:
    """Static integer model of a unit-bin quantised zero-mean Laplacian.

    ``sigma`` is clamped to ``[SIGMA_MIN, SIGMA_MAX]`` and snapped to the
    64-level grid, so encoder and decoder always build the same table.
    Values outside ``[-255, 255]`` go through an escape symbol followed by
    an Exp-Golomb magnitude and a sign bit.
    """

    escape_symbol = 2 * LAPLACE_CLIP + 1
    total = PROB_TOTAL

    def __init__(self, sigma: float):
        self.index = sigma_index(sigma)
        self.sigma = float(_SIGMA_GRID[self.index])
        self.freq, self.cum, self.bits = _laplace_table(self.index)

    @classmethod
    def from_index(cls, k: int) -> "QuantizedLaplacian":
        return _laplace_model(int(k))

    def cost(self, value: int) -> float:
        """Ideal code length of ``value`` in bits, escapes included."""
        if -LAPLACE_CLIP <= value <= LAPLACE_CLIP:
            return self.bits[value + LAPLACE_CLIP]
        n = abs(value) - LAPLACE_CLIP - 1
        return self.bits[self.escape_symbol] + 2 * ((n + 1).bit_length() - 1) + 2

    def encode(self, enc: RangeEncoder, value: int) -> float:
        value = int(value)
        if -LAPLACE_CLIP <= value <= LAPLACE_CLIP:
            s = value + LAPLACE_CLIP
            enc.encode(self.cum[s], self.freq[s], PROB_TOTAL)
            return self.bits[s]
        s = self.escape_symbol
        enc.encode(self.cum[s], self.freq[s], PROB_TOTAL)
        extra = put_expgolomb(enc, abs(value) - LAPLACE_CLIP - 1)
        enc.encode_bits(1 if value < 0 else 0, 1)
        return self.bits[s] + extra + 1

    def decode(self, dec: RangeDecoder) -> int:
        t = dec.target(PROB_TOTAL)
        s = bisect_right(self.cum, t) - 1
        dec.consume(self.cum[s], self.freq[s], PROB_TOTAL)
        if s != self.escape_symbol:
            return s - LAPLACE_CLIP
        magnitude = get_expgolomb(dec) + LAPLACE_CLIP + 1
        return -magnitude if dec.decode_bits(1) else magnitude

    def update(self, symbol):  # static model
        pass


@lru_cache(maxsize=None)
def _laplace_model(k: int) -> QuantizedLaplacian:
    return QuantizedLaplacian(float(_SIGMA_GRID[k]))


class BitLedger:
    """Ideal code length accumulated per cell of an arbitrary grid."""

    def __init__(self, shape):
        self.bits = np.zeros(shape, dtype=np.float64)

    def add(self, cell, bits: float) -> None:
        self.bits[cell] += bits

    def add_many(self, flat_cells, bits) -> None:
        np.add.at(self.bits.reshape(-1), np.asarray(flat_cells, dtype=np.int64), np.asarray(bits))

    def total(self) -> float:
        return float(self.bits.sum())


def _model_list(model, count):
    if isinstance(model, (AdaptiveModel, QuantizedLaplacian)):
        return None
    models = list(model)
    if len(models) != count:
        raise ValueError("got %d models for %d symbols" % (len(models), count))
    return models


def encode_symbols(symbols, model, ledger: BitLedger | None = None, cells=None) -> bytes:
    """Range-code ``symbols``.

    ``model`` is one model shared by every symbol or a sequence with one model
    per symbol. Adaptive models are copied first, so the object passed in can
    be handed unchanged to :func:`decode_symbols`. With a ``ledger``, symbol
    ``k`` adds its ideal code length to ``ledger.bits[cells[k]]``.
    """
    symbols = [int(s) for s in symbols]
    models = _model_list(model, len(symbols))
    if models is None:
        shared = copy.deepcopy(model) if isinstance(model, AdaptiveModel) else model
    if ledger is not None and cells is None:
        raise ValueError("a ledger needs a cell for every symbol")
    enc = RangeEncoder()
    spent = []
    for k, s in enumerate(symbols):
        m = shared if models is None else models[k]
        spent.append(m.encode(enc, s))
    if ledger is not None:
        for cell, b in zip(cells, spent):
            ledger.add(cell, b)
    return enc.finish()


def decode_symbols(stream: bytes, count: int, model) -> list:
    """Inverse of :func:`encode_symbols` for the same model(s) and count."""
    models = _model_list(model, count)
    if models is None:
        shared = copy.deepcopy(model) if isinstance(model, AdaptiveModel) else model
    dec = RangeDecoder(stream)
    out = []
    for k in range(count):
        m = shared if models is None else models[k]
        out.append(m.decode(dec))
    return out
