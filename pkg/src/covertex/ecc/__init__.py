"""Error detection and correction: CRC framing, CEC search, RS baseline."""

from .cec import (
    CecConfig,
    CodedBlock,
    CorrectionResult,
    aliasing_probability,
    cec_correct,
    correct_stream,
    deframe,
    frame_with_checksums,
    framed_length,
    select_config,
    substitution_order,
)
from .crc import CRC12_POLY, CRC12_WIDTH, crc12, crc_bits, crc_symbols
from .rs import RS_PARITY, RS_RADIUS, rs_decode, rs_decode_batch, rs_encode

__all__ = [
    "CecConfig",
    "CodedBlock",
    "CorrectionResult",
    "CRC12_POLY",
    "CRC12_WIDTH",
    "RS_PARITY",
    "RS_RADIUS",
    "aliasing_probability",
    "cec_correct",
    "correct_stream",
    "crc12",
    "crc_bits",
    "crc_symbols",
    "deframe",
    "frame_with_checksums",
    "framed_length",
    "rs_decode",
    "rs_decode_batch",
    "rs_encode",
    "select_config",
    "substitution_order",
]
