"""Payload <-> framed symbol stream conversion and channel-quality metrics.

Payloads (bytes or 8-bit images) are carried as base-``2**bits_per_symbol``
cells. A fixed-width in-band header precedes the payload so a receiver that
only sees a cell stream can recover the exact payload bit length and
parameters. With the default 3 bits per cell and a 10-class carrier, cells
0..7 carry data and the two top classes are reserved (never emitted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FramingError
from .images import ImageBuffer

DEFAULT_CLASS_COUNT = 10
DEFAULT_BITS_PER_SYMBOL = 3

FRAME_VERSION = 1
FLAG_CRC_FRAMED = 0x1
FLAG_IMAGE = 0x2

# Base header: version(4) | flags(4) | payload bit length(40), MSB-first.
_HEADER_BITS = 48
_LENGTH_BITS = 40
# Image extension: width(20) | height(20) | channels(8).
_IMAGE_EXT_BITS = 48

QUANT_STEP = 32  # 256 levels -> 8 levels, floor(p / 32)


# ---------------------------------------------------------------------------
# bit packing helpers
# ---------------------------------------------------------------------------

def _bits_from_bytes(payload: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))


def _bytes_from_bits(bits: np.ndarray) -> bytes:
    if len(bits) % 8 != 0:
        raise FramingError(f"bit count {len(bits)} is not a whole number of bytes")
    return np.packbits(bits).tobytes()


def _symbols_from_bits(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    """Group a bit vector MSB-first into symbols, zero-padding the tail."""
    b = bits_per_symbol
    pad = (-len(bits)) % b
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=bits.dtype)])
    weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, b).astype(np.int64) @ weights


def _bits_from_symbols(symbols: np.ndarray, bits_per_symbol: int, nbits: int) -> np.ndarray:
    b = bits_per_symbol
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    bits = ((np.asarray(symbols, dtype=np.int64)[:, None] >> shifts) & 1).reshape(-1)
    if len(bits) < nbits:
        raise FramingError(f"need {nbits} payload bits, stream provides {len(bits)}")
    return bits[:nbits].astype(np.uint8)


def _int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ConfigurationError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _check_symbol_params(bits_per_symbol: int, class_count: int) -> None:
    if bits_per_symbol < 1:
        raise ConfigurationError(f"bits_per_symbol must be >= 1, got {bits_per_symbol}")
    if (1 << bits_per_symbol) > class_count:
        raise ConfigurationError(
            f"2^{bits_per_symbol} data symbols do not fit in {class_count} classes"
        )


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def header_cell_count(bits_per_symbol: int, flags: int = 0) -> int:
    """Number of header cells preceding the payload (fixed for given params)."""
    cells = -(-_HEADER_BITS // bits_per_symbol)
    if flags & FLAG_IMAGE:
        cells += -(-_IMAGE_EXT_BITS // bits_per_symbol)
    return cells


@dataclass(frozen=True)
class MessageFrame:
    """A framed message: in-band header plus payload cells.

    ``bit_length`` is the exact payload size in bits; the final payload cell
    is zero-padded when the bit length is not a multiple of the cell width.
    """

    bits_per_symbol: int
    flags: int
    bit_length: int
    payload: np.ndarray
    image_shape: tuple[int, int, int] | None = None  # (width, height, channels)

    def header_symbols(self) -> np.ndarray:
        bits = np.concatenate(
            [
                _int_to_bits(FRAME_VERSION, 4),
                _int_to_bits(self.flags, 4),
                _int_to_bits(self.bit_length, _LENGTH_BITS),
            ]
        )
        head = _symbols_from_bits(bits, self.bits_per_symbol)
        if self.flags & FLAG_IMAGE:
            if self.image_shape is None:
                raise ConfigurationError("image frame without image_shape")
            w, h, ch = self.image_shape
            ext = np.concatenate(
                [_int_to_bits(w, 20), _int_to_bits(h, 20), _int_to_bits(ch, 8)]
            )
            head = np.concatenate([head, _symbols_from_bits(ext, self.bits_per_symbol)])
        return head

    def to_symbols(self) -> np.ndarray:
        return np.concatenate([self.header_symbols(), np.asarray(self.payload, dtype=np.int64)])


def encode_bits(
    payload: bytes,
    bits_per_symbol: int = DEFAULT_BITS_PER_SYMBOL,
    class_count: int = DEFAULT_CLASS_COUNT,
    flags: int = 0,
) -> MessageFrame:
    """Frame a byte payload as symbols, MSB-first, zero-padded at the tail."""
    _check_symbol_params(bits_per_symbol, class_count)
    bit_length = len(payload) * 8
    if bit_length >> _LENGTH_BITS:
        raise ConfigurationError(f"payload of {len(payload)} bytes exceeds frame limit")
    bits = _bits_from_bytes(payload)
    symbols = _symbols_from_bits(bits, bits_per_symbol)
    return MessageFrame(
        bits_per_symbol=bits_per_symbol,
        flags=flags & ~FLAG_IMAGE,
        bit_length=bit_length,
        payload=symbols,
    )


def decode_bits(frame: MessageFrame) -> bytes:
    """Recover the byte payload; inverse of :func:`encode_bits`."""
    if frame.bit_length % 8 != 0:
        raise FramingError(f"payload bit length {frame.bit_length} is not byte-aligned")
    b = frame.bits_per_symbol
    expected_cells = -(-frame.bit_length // b)
    if len(frame.payload) < expected_cells:
        raise FramingError(
            f"header promises {expected_cells} payload cells, frame has {len(frame.payload)}"
        )
    bits = _bits_from_symbols(frame.payload, b, frame.bit_length)
    return _bytes_from_bits(bits)


def encode_image(
    img: ImageBuffer,
    bits_per_symbol: int = DEFAULT_BITS_PER_SYMBOL,
    class_count: int = DEFAULT_CLASS_COUNT,
    flags: int = 0,
) -> MessageFrame:
    """Frame an image as 3-bit quantized pixels with dimensions in the header."""
    _check_symbol_params(bits_per_symbol, class_count)
    q = quantize_image(img)
    bits = _bits_from_symbols(q, 3, len(q) * 3)
    return MessageFrame(
        bits_per_symbol=bits_per_symbol,
        flags=flags | FLAG_IMAGE,
        bit_length=len(bits),
        payload=_symbols_from_bits(bits, bits_per_symbol),
        image_shape=(img.width, img.height, img.channels),
    )


def decode_image(frame: MessageFrame) -> ImageBuffer:
    """Reconstruct the (approximate) image carried by an image frame."""
    if not frame.flags & FLAG_IMAGE:
        raise FramingError("frame does not carry an image payload")
    if frame.image_shape is None:
        raise FramingError("image frame is missing dimensions")
    w, h, ch = frame.image_shape
    bits = _bits_from_symbols(frame.payload, frame.bits_per_symbol, frame.bit_length)
    symbols = _symbols_from_bits(bits, 3)[: w * h * ch]
    return dequantize_image(symbols, w, h, ch)


@dataclass(frozen=True)
class FrameHeader:
    bits_per_symbol: int
    flags: int
    bit_length: int
    image_shape: tuple[int, int, int] | None
    header_cells: int

    @property
    def payload_cells(self) -> int:
        return -(-self.bit_length // self.bits_per_symbol)

    @property
    def total_cells(self) -> int:
        return self.header_cells + self.payload_cells


def parse_header(stream, bits_per_symbol: int = DEFAULT_BITS_PER_SYMBOL) -> FrameHeader:
    """Decode just the in-band header from the leading cells of a stream."""
    b = bits_per_symbol
    stream = np.asarray(stream, dtype=np.int64)
    base_cells = -(-_HEADER_BITS // b)
    if len(stream) < base_cells:
        raise FramingError("stream shorter than the frame header")
    head = stream[:base_cells]
    if head.min(initial=0) < 0 or head.max(initial=0) >= (1 << b):
        raise FramingError("header cells outside the data alphabet")
    bits = _bits_from_symbols(head, b, _HEADER_BITS)
    version = _bits_to_int(bits[:4])
    if version != FRAME_VERSION:
        raise FramingError(f"unsupported frame version {version}")
    flags = _bits_to_int(bits[4:8])
    bit_length = _bits_to_int(bits[8 : 8 + _LENGTH_BITS])

    pos = base_cells
    image_shape = None
    if flags & FLAG_IMAGE:
        ext_cells = -(-_IMAGE_EXT_BITS // b)
        if len(stream) < pos + ext_cells:
            raise FramingError("stream truncated inside the image header extension")
        ext = stream[pos : pos + ext_cells]
        if ext.min(initial=0) < 0 or ext.max(initial=0) >= (1 << b):
            raise FramingError("header cells outside the data alphabet")
        ebits = _bits_from_symbols(ext, b, _IMAGE_EXT_BITS)
        image_shape = (
            _bits_to_int(ebits[:20]),
            _bits_to_int(ebits[20:40]),
            _bits_to_int(ebits[40:48]),
        )
        pos += ext_cells
    return FrameHeader(
        bits_per_symbol=b,
        flags=flags,
        bit_length=bit_length,
        image_shape=image_shape,
        header_cells=pos,
    )


def frame_from_symbols(
    stream: np.ndarray,
    bits_per_symbol: int = DEFAULT_BITS_PER_SYMBOL,
) -> MessageFrame:
    """Parse a received cell stream back into a frame.

    Cells beyond the header-promised payload length are tolerated and
    ignored (checksum-framing pad); a short stream is a framing error.
    """
    b = bits_per_symbol
    stream = np.asarray(stream, dtype=np.int64)
    header = parse_header(stream, b)
    pos = header.header_cells
    if len(stream) < pos + header.payload_cells:
        raise FramingError(
            f"header promises {header.payload_cells} payload cells, "
            f"stream has {len(stream) - pos}"
        )
    # Mask noise-corrupted cells into the alphabet; errors stay errors.
    payload = stream[pos : pos + header.payload_cells] & ((1 << b) - 1)
    return MessageFrame(
        bits_per_symbol=b,
        flags=header.flags,
        bit_length=header.bit_length,
        payload=payload,
        image_shape=header.image_shape,
    )


# ---------------------------------------------------------------------------
# image quantization
# ---------------------------------------------------------------------------

def quantize_image(img: ImageBuffer) -> np.ndarray:
    """Map each 8-bit pixel p to floor(p / 32), one 3-bit symbol per value."""
    return (img.flat() // QUANT_STEP).astype(np.int64)


def dequantize_image(symbols: np.ndarray, width: int, height: int, channels: int) -> ImageBuffer:
    """Reconstruct pixels at bin midpoints: p = 32 * q + 16."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) != width * height * channels:
        raise FramingError(
            f"{len(symbols)} symbols cannot fill a {width}x{height}x{channels} image"
        )
    if symbols.min(initial=0) < 0 or symbols.max(initial=0) > 7:
        raise FramingError("quantized symbols must be in [0, 7]")
    px = (symbols * QUANT_STEP + QUANT_STEP // 2).astype(np.uint8)
    return ImageBuffer(
        width=width,
        height=height,
        channels=channels,
        pixels=px.reshape(height, width, channels),
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def mape(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean absolute pixel error, averaged over every scalar value."""
    if not a.same_shape(b):
        raise ValueError("images must have identical dimensions")
    return float(np.abs(a.flat() - b.flat()).mean())


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB with peak 255; inf for identical images."""
    if not a.same_shape(b):
        raise ValueError("images must have identical dimensions")
    mse = float(np.square(a.flat() - b.flat()).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def symbol_error_rate(sent, received) -> float:
    """Fraction of positions where the streams differ (normalized Hamming)."""
    s = np.asarray(sent)
    r = np.asarray(received)
    if s.shape != r.shape:
        raise ValueError(f"stream lengths differ: {s.shape} vs {r.shape}")
    if s.size == 0:
        return 0.0
    return float(np.mean(s != r))


@dataclass(frozen=True)
class ReceptionReport:
    metric_name: str
    distance: float
    threshold: float
    accepted: bool

    def __post_init__(self):
        if self.accepted != (self.distance <= self.threshold):
            raise ValueError("accepted flag inconsistent with distance/threshold")


def reception_check(sent, received, metric: str, delta: float) -> ReceptionReport:
    """Distance between sent and received under ``metric``, accepted iff <= delta.

    ``hamming`` counts differing positions of equal-length streams; ``mape``
    is the mean absolute difference (streams or images).
    """
    if isinstance(sent, ImageBuffer):
        sent = sent.flat()
    if isinstance(received, ImageBuffer):
        received = received.flat()
    s = np.asarray(sent, dtype=np.int64)
    r = np.asarray(received, dtype=np.int64)
    if s.shape != r.shape:
        raise ValueError(f"stream lengths differ: {s.shape} vs {r.shape}")
    if metric == "hamming":
        distance = float(np.count_nonzero(s != r))
    elif metric == "mape":
        distance = float(np.abs(s - r).mean()) if s.size else 0.0
    else:
        raise ValueError(f"unknown reception metric {metric!r}")
    return ReceptionReport(
        metric_name=metric,
        distance=distance,
        threshold=float(delta),
        accepted=distance <= delta,
    )


# ---------------------------------------------------------------------------
# on-disk symbol streams
# ---------------------------------------------------------------------------

_STREAM_MAGIC = b"CVTX"
_STREAM_VERSION = 1


def write_stream_file(path: str | Path, symbols: np.ndarray, bits_per_symbol: int) -> None:
    """Write cells to disk: magic, version, params, then one cell per nibble."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size and (symbols.min() < 0 or symbols.max() > 15):
        raise ConfigurationError("stream files hold one symbol per nibble (0..15)")
    n = len(symbols)
    head = _STREAM_MAGIC + bytes([_STREAM_VERSION, bits_per_symbol]) + n.to_bytes(8, "big")
    padded = np.zeros(n + (n % 2), dtype=np.int64)
    padded[:n] = symbols
    packed = ((padded[0::2] << 4) | padded[1::2]).astype(np.uint8)  # high nibble first
    Path(path).write_bytes(head + packed.tobytes())


def read_stream_file(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a stream file; returns (symbols, bits_per_symbol)."""
    data = Path(path).read_bytes()
    if data[:4] != _STREAM_MAGIC:
        raise FramingError(f"{path}: bad magic, not a symbol stream file")
    if data[4] != _STREAM_VERSION:
        raise FramingError(f"{path}: unsupported stream version {data[4]}")
    bits_per_symbol = data[5]
    n = int.from_bytes(data[6:14], "big")
    body = np.frombuffer(data[14 : 14 + (n + 1) // 2], dtype=np.uint8)
    if len(body) < (n + 1) // 2:
        raise FramingError(f"{path}: truncated stream body")
    symbols = np.empty(len(body) * 2, dtype=np.int64)
    symbols[0::2] = body >> 4
    symbols[1::2] = body & 0xF
    return symbols[:n], bits_per_symbol
