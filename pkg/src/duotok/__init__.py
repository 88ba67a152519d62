"""Dual-codebook music tokenization toolkit: features, quantizers, losses and LM evaluation."""
from .errors import BadMagicError, ConfigError, DataError, DuoTokError, FormatError, TruncatedError
from .features import FeatureSequence
from .simvq import Route

__version__ = "0.1.0"

__all__ = [
    "BadMagicError", "ConfigError", "DataError", "DuoTokError", "FormatError", "TruncatedError",
    "FeatureSequence", "Route",
]
