"""Gain units: channel-wise quantisation scaling for continuous variable rate.

A :class:`GainUnit` stores gain vectors at a few trade-off values ``beta``.
Vectors for other ``beta`` are extrapolated (outside the stored range) or
interpolated (inside it). :func:`match_rate` searches ``beta`` so the coded
size hits a bits-per-pixel target.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "GainVector",
    "GainUnit",
    "RateTarget",
    "RateMatch",
    "RateError",
    "NotReachable",
    "IterationLimit",
    "default_gain_unit",
    "gain_for_beta",
    "apply_gain",
    "apply_sigma_gain",
    "quantize_beta",
    "match_rate",
    "DEFAULT_BETAS",
    "INTERP_MODES",
]

DEFAULT_BETAS = (1.0, 2.0, 4.0, 8.0)
INTERP_MODES = ("linear", "paper-literal")


class GainVector:
    """Positive per-channel scale factors; the inverse is derived, never stored."""

    def __init__(self, values):
        v = np.array(values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise ValueError("gain vector needs at least one channel")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("gain factors must be finite and positive")
        v.setflags(write=False)
        self.values = v

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return isinstance(other, GainVector) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return "GainVector(%s)" % np.array2string(self.values, precision=4)

    @property
    def inverse(self) -> np.ndarray:
        return 1.0 / self.values

    @classmethod
    def ones(cls, channels: int) -> "GainVector":
        return cls(np.ones(channels))

    def scaled(self, factor: float) -> "GainVector":
        return GainVector(self.values * factor)


@dataclass(frozen=True)
class GainUnit:
    betas: tuple
    vectors: tuple

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        vectors = tuple(v if isinstance(v, GainVector) else GainVector(v) for v in self.vectors)
        if not betas:
            raise ValueError("gain unit needs at least one entry")
        if len(betas) != len(vectors):
            raise ValueError("%d betas but %d vectors" % (len(betas), len(vectors)))
        if any(b <= 0 for b in betas):
            raise ValueError("betas must be positive")
        if any(b1 >= b2 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly increasing")
        if len({len(v) for v in vectors}) != 1:
            raise ValueError("all gain vectors need the same channel count")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "vectors", vectors)

    @property
    def channels(self) -> int:
        return len(self.vectors[0])

    @property
    def beta_min(self) -> float:
        return self.betas[0]

    @property
    def beta_max(self) -> float:
        return self.betas[-1]

    def to_json(self) -> str:
        return json.dumps({"betas": list(self.betas), "vectors": [v.values.tolist() for v in self.vectors]})

    @classmethod
    def from_json(cls, text: str) -> "GainUnit":
        obj = json.loads(text)
        try:
            return cls(tuple(obj["betas"]), tuple(obj["vectors"]))
        except (KeyError, TypeError) as exc:
            raise ValueError("gain unit JSON needs 'betas' and 'vectors': %s" % exc) from None


def default_gain_unit(channels: int, betas=DEFAULT_BETAS) -> GainUnit:
    """Analytic stand-in for trained gains: ``sqrt(beta / beta_min)`` on every channel."""
    ref = betas[0]
    return GainUnit(tuple(betas), tuple(GainVector(np.full(channels, math.sqrt(b / ref))) for b in betas))


def gain_for_beta(unit: GainUnit, beta: float, mode: str = "linear") -> GainVector:
    """Gain vector for an arbitrary ``beta``.

    Outside ``[beta_min, beta_max]`` the nearest stored vector is scaled by
    ``beta / beta_t``. Inside, ``linear`` blends the bracketing vectors;
    ``paper-literal`` returns ``m_l * (beta - beta_l) / (beta_h - beta_l)``,
    which collapses towards zero near ``beta_l``.
    """
    if mode not in INTERP_MODES:
        raise ValueError("unknown interpolation mode %r" % mode)
    if not beta > 0:
        raise ValueError("beta must be positive, got %r" % beta)
    betas = unit.betas
    for b, v in zip(betas, unit.vectors):
        if beta == b:
            return v
    if beta < betas[0]:
        return unit.vectors[0].scaled(beta / betas[0])
    if beta > betas[-1]:
        return unit.vectors[-1].scaled(beta / betas[-1])
    h = int(np.searchsorted(betas, beta))
    lo, hi = betas[h - 1], betas[h]
    t = (beta - lo) / (hi - lo)
    m_lo = unit.vectors[h - 1].values
    if mode == "paper-literal":
        return GainVector(m_lo * t)
    return GainVector(m_lo + (unit.vectors[h].values - m_lo) * t)


def _channel_scale(latent, factors, name):
    latent = np.asarray(latent, dtype=np.float64)
    if latent.ndim < 1 or latent.shape[0] != factors.size:
        raise ValueError(
            "%s has %d channels, latent has %s" % (name, factors.size, latent.shape[0] if latent.ndim else 0)
        )
    return factors.reshape((-1,) + (1,) * (latent.ndim - 1))


def apply_gain(latent, g: GainVector, inverse: bool = False) -> np.ndarray:
    """Multiply channel ``c`` by ``g[c]`` (or divide, for the inverse gain)."""
    latent = np.asarray(latent, dtype=np.float64)
    f = _channel_scale(latent, g.values, "gain vector")
    return latent / f if inverse else latent * f


def apply_sigma_gain(sigma, g: GainVector) -> np.ndarray:
    """Scale the entropy-model sigma so it follows the gained latent."""
    sigma = np.asarray(sigma, dtype=np.float64)
    return sigma * _channel_scale(sigma, g.values, "sigma gain")


def quantize_beta(beta: float) -> float:
    """Round to the Q16.16 grid used in the container header."""
    fixed = int(round(beta * 65536.0))
    if not 1 <= fixed <= 0xFFFFFFFF:
        raise ValueError("beta %r not representable in Q16.16" % beta)
    return fixed / 65536.0


# --- rate matching -----------------------------------------------------------


@dataclass(frozen=True)
class RateTarget:
    bpp: float
    tolerance: float = 0.10
    max_iterations: int = 20

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError("target bpp must be positive")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def accepts(self, bpp: float) -> bool:
        return abs(bpp - self.bpp) / self.bpp < self.tolerance


@dataclass
class RateMatch:
    beta: float
    bpp: float
    bitstream: object
    trials: list = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter((self.beta, self.bpp, self.bitstream))


class RateError(Exception):
    pass


class NotReachable(RateError):
    def __init__(self, target, low, high):
        self.target = target
        self.low = low
        self.high = high
        super().__init__(
            "target %.4f bpp outside reachable range [%.4f, %.4f] (beta %g .. %g)"
            % (target, low[1], high[1], low[0], high[0])
        )


class IterationLimit(RateError):
    def __init__(self, target, best: RateMatch):
        self.target = target
        self.best = best
        super().__init__(
            "no beta within tolerance of %.4f bpp; best %.4f bpp at beta %g" % (target, best.bpp, best.beta)
        )


def match_rate(image, config, target: RateTarget, unit: GainUnit | None = None) -> RateMatch:
    """Find ``beta`` whose encoding lands within ``target.tolerance`` of the target bpp.

    Bisection on ``log(beta)``, seeded with encodes at the unit's smallest and
    largest stored beta and widened at most to ``[beta_min / 8, beta_max * 8]``.
    Rate is measured on the whole container, header and quality map included.
    """
    from .codec import encode, prepare_image

    prepared = prepare_image(image)
    if unit is None:
        unit = config.gain_unit_y or default_gain_unit(config.c_y)
    trials = []

    def trial(beta):
        beta = quantize_beta(beta)
        bs = encode(prepared, replace(config, beta=beta))
        bpp = bs.bpp
        trials.append((beta, bpp))
        log.debug("rate match trial beta=%g bpp=%.5f", beta, bpp)
        return RateMatch(beta, bpp, bs, trials)

    lo = trial(unit.beta_min)
    if target.accepts(lo.bpp):
        return lo
    hi = trial(unit.beta_max) if unit.beta_max != unit.beta_min else lo
    if target.accepts(hi.bpp):
        return hi
    if target.bpp < lo.bpp:
        edge = trial(unit.beta_min / 8.0)
        if target.accepts(edge.bpp):
            return edge
        if target.bpp < edge.bpp:
            raise NotReachable(target.bpp, (edge.beta, edge.bpp), (hi.beta, hi.bpp))
        lo, hi = edge, lo
    elif target.bpp > hi.bpp:
        edge = trial(unit.beta_max * 8.0)
        if target.accepts(edge.bpp):
            return edge
        if target.bpp > edge.bpp:
            raise NotReachable(target.bpp, (lo.beta, lo.bpp), (edge.beta, edge.bpp))
        lo, hi = hi, edge

    best = min((lo, hi), key=lambda m: abs(m.bpp - target.bpp))
    for _ in range(target.max_iterations):
        mid = trial(math.exp(0.5 * (math.log(lo.beta) + math.log(hi.beta))))
        if abs(mid.bpp - target.bpp) < abs(best.bpp - target.bpp):
            best = mid
        if target.accepts(mid.bpp):
            return mid
        if mid.beta in (lo.beta, hi.beta):
            break
        if mid.bpp < target.bpp:
            lo = mid
        else:
            hi = mid
    raise IterationLimit(target.bpp, best)
