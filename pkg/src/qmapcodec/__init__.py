"""Spatial bit allocation for a learned-codec-style image coder."""

from .bdm import BitDistributionMap, BlockBitRecord, parse_trace, regroup_16
from .codec import CodecConfig, decode, encode, encode_detailed
from .gain import GainUnit, GainVector, RateTarget, match_rate
from .imagecore import ColorSpace, PlanarImage, read_pnm, write_pnm
from .qmap import QualityIndexMap

__version__ = "0.1.0"

__all__ = [
    "BitDistributionMap",
    "BlockBitRecord",
    "CodecConfig",
    "ColorSpace",
    "GainUnit",
    "GainVector",
    "PlanarImage",
    "QualityIndexMap",
    "RateTarget",
    "decode",
    "encode",
    "encode_detailed",
    "match_rate",
    "parse_trace",
    "read_pnm",
    "regroup_16",
    "write_pnm",
]
