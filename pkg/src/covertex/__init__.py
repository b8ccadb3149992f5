"""Covert label-space storage channels: encode, store, read back, correct."""

from . import addresses, bench, channel, codec, ecc, images, kernels, reader, writer
from .errors import BackendError, ConfigurationError, CovertexError, FramingError

__version__ = "0.1.0"

__all__ = [
    "addresses",
    "bench",
    "channel",
    "codec",
    "ecc",
    "images",
    "kernels",
    "reader",
    "writer",
    "BackendError",
    "ConfigurationError",
    "CovertexError",
    "FramingError",
]
