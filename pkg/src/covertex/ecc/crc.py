"""Table-driven CRC over bit and symbol streams.

Fixed convention: initial register 0, MSB-first, no reflection, no final
XOR. The default generator is CRC-12 with polynomial 0x80F
(x^12 + x^11 + x^3 + x^2 + x + 1), which has good Hamming distance at the
short block lengths used by the checksum framing.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

CRC12_POLY = 0x80F
CRC12_WIDTH = 12

_tables: dict[tuple[int, int, int], np.ndarray] = {}


def get_table(poly: int = CRC12_POLY, width: int = CRC12_WIDTH, chunk_bits: int = 3) -> np.ndarray:
    key = (poly, width, chunk_bits)
    if key not in _tables:
        _tables[key] = kernels.crc_table(poly, width, chunk_bits)
    return _tables[key]


def crc_bits(bits, poly: int = CRC12_POLY, width: int = CRC12_WIDTH) -> int:
    """CRC of a bit sequence: table-driven bytes, bit-serial tail."""
    bits = np.asarray(bits, dtype=np.int64)
    n = len(bits)
    head = n - n % 8 if width >= 8 else 0  # chunked steps need chunk <= width
    reg = 0
    if head:
        weights = 1 << np.arange(7, -1, -1, dtype=np.int64)
        table = get_table(poly, width, 8)
        reg = kernels.crc_symbols(bits[:head].reshape(-1, 8) @ weights, table, width, 8)
    mask = (1 << width) - 1
    for b in bits[head:]:
        top = ((reg >> (width - 1)) & 1) ^ int(b)
        reg = (reg << 1) & mask
        if top:
            reg ^= poly & mask
    return reg


def crc12(bits) -> int:
    """CRC-12 (poly 0x80F) of a bit sequence."""
    return crc_bits(bits, CRC12_POLY, CRC12_WIDTH)


def crc_symbols(symbols, bits_per_symbol: int = 3, poly: int = CRC12_POLY, width: int = CRC12_WIDTH) -> int:
    """CRC of a cell stream, consuming bits_per_symbol bits per cell."""
    return kernels.crc_symbols(symbols, get_table(poly, width, bits_per_symbol), width, bits_per_symbol)
