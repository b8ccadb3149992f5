"""Checksum framing and likelihood-ordered combinatorial error correction.

The sender partitions the cell stream into k-cell blocks and appends the
CRC of each block as checksum cells. The receiver, holding per-cell
candidate rankings, walks substitution vectors in order of descending joint
probability until the checksum verifies; checksum cells are searched
exactly like data cells since they cross the same noisy channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigurationError, FramingError
from ..reader import RankedCell
from .crc import CRC12_POLY, CRC12_WIDTH, get_table


@dataclass(frozen=True)
class CecConfig:
    """Block-level correction parameters.

    ``data_cells`` per block, ``crc_bits`` wide checksum split into
    ``crc_cells`` cells, candidate ranks capped at ``topk``, at most
    ``depth_limit`` substitution vectors tried.
    """

    data_cells: int
    crc_bits: int = CRC12_WIDTH
    topk: int = 3
    depth_limit: int = 350
    polynomial: int = CRC12_POLY
    bits_per_symbol: int = 3
    restrict_alphabet: bool = False  # drop reserved-class candidates before ranking

    def __post_init__(self):
        if self.data_cells < 1 or self.topk < 1 or self.depth_limit < 1:
            raise ConfigurationError("data_cells, topk and depth_limit must be >= 1")
        if self.crc_bits % self.bits_per_symbol:
            raise ConfigurationError(
                f"crc width {self.crc_bits} is not a whole number of "
                f"{self.bits_per_symbol}-bit cells"
            )

    @property
    def crc_cells(self) -> int:
        return self.crc_bits // self.bits_per_symbol

    @property
    def block_cells(self) -> int:
        return self.data_cells + self.crc_cells

    @property
    def alphabet(self) -> int:
        return 1 << self.bits_per_symbol


def select_config(top1_estimate: float) -> CecConfig:
    """Pick block size, depth limit and topK from the channel-quality estimate."""
    if not 0.0 < top1_estimate <= 1.0:
        raise ConfigurationError(f"top-1 estimate must be in (0, 1], got {top1_estimate}")
    if top1_estimate >= 0.95:
        return CecConfig(data_cells=7, depth_limit=350, topk=3)
    if top1_estimate >= 0.90:
        return CecConfig(data_cells=5, depth_limit=450, topk=4)
    return CecConfig(data_cells=5, depth_limit=650, topk=4)


def aliasing_probability(crc_bits: int) -> float:
    """Chance a wrong substitution still satisfies the checksum: 2^-bits."""
    if crc_bits < 1:
        raise ConfigurationError("crc_bits must be >= 1")
    return 2.0 ** -crc_bits


@dataclass(frozen=True)
class CodedBlock:
    data: tuple
    checksum: tuple

    def __post_init__(self):
        for cell in (*self.data, *self.checksum):
            if not isinstance(cell, RankedCell):
                raise TypeError("blocks are built from RankedCell instances")


@dataclass(frozen=True)
class CorrectionResult:
    symbols: np.ndarray  # data cells then checksum cells, best accepted guess
    permutations_tried: int
    status: str  # "verified" | "exhausted-fallback"
    substitution: tuple  # chosen rank per cell

    @property
    def verified(self) -> bool:
        return self.status == "verified"


def _block_matrices(block: CodedBlock, config: CecConfig):
    """Per-cell candidate labels and log-probs, topk columns each.

    With ``restrict_alphabet`` the reserved classes (never stored by the
    sender) are dropped before ranking, so no permutations are spent on
    impossible symbols; by default candidates enter by raw rank and
    out-of-alphabet picks simply never verify.
    """
    cells = (*block.data, *block.checksum)
    if len(block.data) != config.data_cells or len(block.checksum) != config.crc_cells:
        raise ConfigurationError("block shape does not match the configuration")
    topk = config.topk
    logp = np.empty((len(cells), topk), dtype=np.float64)
    labels = np.empty((len(cells), topk), dtype=np.int64)
    for i, cell in enumerate(cells):
        cands, probs = cell.candidates, cell.probs
        if config.restrict_alphabet:
            valid = cands < config.alphabet
            cands, probs = cands[valid], probs[valid]
        if len(cands) < topk:
            raise ConfigurationError(
                f"cell {i} ranks {len(cands)} usable candidates, config needs {topk}"
            )
        labels[i] = cands[:topk]
        logp[i] = np.log(probs[:topk])
    return logp, labels


def _key_to_ranks(key: int, cells: int, topk: int) -> tuple:
    ranks = []
    for i in range(cells):
        stride = topk ** (cells - 1 - i)
        d, key = divmod(key, stride)
        ranks.append(int(d))
    return tuple(ranks)


def cec_correct(block: CodedBlock, config: CecConfig) -> CorrectionResult:
    """Best-first substitution search until the block checksum verifies.

    Starts from the all-top-1 vector; each step tries the most likely
    untried vector (ties broken lexicographically). Vectors selecting a
    label outside the data alphabet count as tried but can never verify.
    Hitting the depth limit falls back to the top-1 symbols.
    """
    logp, labels = _block_matrices(block, config)
    table = get_table(config.polynomial, config.crc_bits, config.bits_per_symbol)
    dummy = np.empty(1, dtype=np.int64)
    found, perms, key = kernels.cec_search(
        logp,
        labels,
        config.data_cells,
        config.bits_per_symbol,
        table,
        config.crc_bits,
        config.alphabet,
        config.depth_limit,
        False,
        dummy,
        True,
    )
    ncells = config.block_cells
    if found:
        ranks = _key_to_ranks(int(key), ncells, config.topk)
        status = "verified"
    else:
        ranks = (0,) * ncells
        status = "exhausted-fallback"
    symbols = labels[np.arange(ncells), list(ranks)]
    return CorrectionResult(
        symbols=symbols,
        permutations_tried=int(perms),
        status=status,
        substitution=ranks,
    )


def substitution_order(block: CodedBlock, config: CecConfig, limit: int) -> list[tuple]:
    """First ``limit`` substitution vectors in search order (never verifies).

    Test hook: the emitted sequence must equal the exhaustive enumeration of
    all topk^cells vectors sorted by joint probability.
    """
    logp, labels = _block_matrices(block, config)
    table = get_table(config.polynomial, config.crc_bits, config.bits_per_symbol)
    order = np.empty(limit, dtype=np.int64)
    _, perms, _ = kernels.cec_search(
        logp,
        labels,
        config.data_cells,
        config.bits_per_symbol,
        table,
        config.crc_bits,
        config.alphabet,
        limit,
        True,
        order,
        False,
    )
    ncells = config.block_cells
    return [_key_to_ranks(int(k), ncells, config.topk) for k in order[:perms]]


# ---------------------------------------------------------------------------
# stream framing
# ---------------------------------------------------------------------------

def frame_with_checksums(stream, config: CecConfig) -> np.ndarray:
    """Partition into k-cell blocks (zero-padded tail) and append CRC cells."""
    stream = np.asarray(stream, dtype=np.int64)
    if stream.size and (stream.min() < 0 or stream.max() >= config.alphabet):
        raise ConfigurationError("data symbols must fit the cell alphabet")
    if stream.size == 0:
        return stream.copy()
    k = config.data_cells
    nblocks = -(-len(stream) // k)
    padded = np.zeros(nblocks * k, dtype=np.int64)
    padded[: len(stream)] = stream
    blocks = padded.reshape(nblocks, k)
    table = get_table(config.polynomial, config.crc_bits, config.bits_per_symbol)
    crcs = kernels.crc_symbols_batch(blocks, table, config.crc_bits, config.bits_per_symbol)
    shifts = np.arange(config.crc_cells - 1, -1, -1, dtype=np.int64) * config.bits_per_symbol
    crc_cells = (crcs[:, None] >> shifts) & (config.alphabet - 1)
    return np.concatenate([blocks, crc_cells], axis=1).reshape(-1)


def deframe(framed, config: CecConfig, data_cells: int | None = None) -> np.ndarray:
    """Strip checksum cells; optionally trim the zero padding to data_cells."""
    framed = np.asarray(framed, dtype=np.int64)
    if len(framed) % config.block_cells:
        raise FramingError(
            f"framed stream length {len(framed)} is not a multiple of {config.block_cells}"
        )
    blocks = framed.reshape(-1, config.block_cells)
    data = blocks[:, : config.data_cells].reshape(-1)
    if data_cells is not None:
        if data_cells > len(data):
            raise FramingError(f"framed stream holds {len(data)} data cells, need {data_cells}")
        data = data[:data_cells]
    return data


def correct_stream(cells, config: CecConfig):
    """CEC-correct a whole received stream of RankedCells.

    Returns (data cells with padding still attached, per-block results).
    """
    if len(cells) % config.block_cells:
        raise FramingError(
            f"received {len(cells)} cells, not a multiple of block size {config.block_cells}"
        )
    results = []
    data_parts = []
    k = config.data_cells
    for off in range(0, len(cells), config.block_cells):
        block = CodedBlock(
            data=tuple(cells[off : off + k]),
            checksum=tuple(cells[off + k : off + config.block_cells]),
        )
        res = cec_correct(block, config)
        results.append(res)
        data_parts.append(res.symbols[:k])
    data = np.concatenate(data_parts) if data_parts else np.empty(0, dtype=np.int64)
    return data, results


def framed_length(data_cells: int, config: CecConfig) -> int:
    """Cells on the wire for a data stream of the given length."""
    nblocks = -(-data_cells // config.data_cells) if data_cells else 0
    return nblocks * config.block_cells
