"""8-bit image buffers and binary PGM/PPM (P5/P6) I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FramingError


@dataclass(frozen=True)
class ImageBuffer:
    """An 8-bit image: grayscale (1 channel) or RGB (3 channels).

    Pixels are stored as a (height, width, channels) uint8 array,
    row-major with channels interleaved per pixel.
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"pixel array shape {px.shape} does not match "
                f"{(self.height, self.width, self.channels)}"
            )
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from a (h, w), (h, w, 1) or (h, w, 3) array of 0..255 values."""
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got shape {a.shape}")
        if a.min(initial=0) < 0 or a.max(initial=0) > 255:
            raise ValueError("pixel values must be in [0, 255]")
        a = a.astype(np.uint8)
        h, w, c = a.shape
        return cls(width=w, height=h, channels=c, pixels=a)

    def flat(self) -> np.ndarray:
        """Row-major, channel-interleaved flat view (int64)."""
        return self.pixels.reshape(-1).astype(np.int64)

    def same_shape(self, other: "ImageBuffer") -> bool:
        return (self.width, self.height, self.channels) == (
            other.width,
            other.height,
            other.channels,
        )


def write_pnm(img: ImageBuffer, path: str | Path) -> None:
    """Write as binary PGM (P5, grayscale) or PPM (P6, RGB), maxval 255."""
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def read_pnm(path: str | Path) -> ImageBuffer:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        channels = 1
    elif data[:2] == b"P6":
        channels = 3
    else:
        raise FramingError(f"{path}: not a binary PGM/PPM file")

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comment lines allowed. Pixel data starts after the single
    # whitespace byte that terminates maxval.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FramingError(f"{path}: truncated PNM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise FramingError(f"{path}: only maxval 255 is supported, got {maxval}")
    n = width * height * channels
    raw = data[pos : pos + n]
    if len(raw) < n:
        raise FramingError(f"{path}: expected {n} pixel bytes, got {len(raw)}")
    px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(width=width, height=height, channels=channels, pixels=px)
