"""Reed-Solomon baseline over GF(8) with four parity cells.

The code evaluates degree-<4 message polynomials at all eight field
elements, giving an (8, 4) MDS code with minimum distance 5 (systematic in
the first four positions; shortened variants zero out leading data cells).
Decoding is exact bounded-distance decoding with radius 2: at GF(8) scale
the full codebook is tiny (<= 4096 words), so the decoder scans it for the
unique codeword within distance 2 instead of running syndrome algebra; the
outcome is identical, and the scan vectorizes/compiles well.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ConfigurationError

GF_BITS = 3
GF_SIZE = 8
_PRIM_POLY = 0xB  # x^3 + x + 1

RS_PARITY = 4
RS_MAX_K = 4
RS_RADIUS = RS_PARITY // 2  # corrects up to half the checksum size


def _build_gf_tables():
    exp = np.zeros(GF_SIZE - 1, dtype=np.int64)
    log = np.zeros(GF_SIZE, dtype=np.int64)
    x = 1
    for i in range(GF_SIZE - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & GF_SIZE:
            x ^= _PRIM_POLY
    return exp, log


_GF_EXP, _GF_LOG = _build_gf_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_GF_EXP[(_GF_LOG[a] + _GF_LOG[b]) % (GF_SIZE - 1)])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("no inverse of 0 in GF(8)")
    return int(_GF_EXP[(-_GF_LOG[a]) % (GF_SIZE - 1)])


# Full multiplication table for vectorized encoding.
_GF_MUL = np.array([[gf_mul(a, b) for b in range(GF_SIZE)] for a in range(GF_SIZE)], dtype=np.int64)

_POINTS = list(range(GF_SIZE))  # evaluation points: every element of GF(8)


def _lagrange_codeword(values4) -> np.ndarray:
    """Evaluate at all 8 points the cubic through (x_i, values4[i]), i < 4."""
    word = np.zeros(GF_SIZE, dtype=np.int64)
    for i in range(RS_MAX_K):
        if values4[i] == 0:
            continue
        # basis polynomial L_i evaluated at every point
        for p_idx, x in enumerate(_POINTS):
            num, den = 1, 1
            for j in range(RS_MAX_K):
                if j == i:
                    continue
                num = gf_mul(num, x ^ _POINTS[j])
                den = gf_mul(den, _POINTS[i] ^ _POINTS[j])
            li = gf_mul(num, gf_inv(den))
            word[p_idx] ^= gf_mul(int(values4[i]), li)
    return word


def _generator_matrix() -> np.ndarray:
    rows = [_lagrange_codeword(np.eye(RS_MAX_K, dtype=np.int64)[i]) for i in range(RS_MAX_K)]
    return np.stack(rows)


_GEN = _generator_matrix()

_codebooks: dict[int, np.ndarray] = {}


def _codebook(k: int) -> np.ndarray:
    """All codewords whose shortened (leading) data positions are zero."""
    if k not in _codebooks:
        datas = np.zeros((GF_SIZE**k, RS_MAX_K), dtype=np.int64)
        grid = np.indices((GF_SIZE,) * k).reshape(k, -1).T
        datas[:, RS_MAX_K - k :] = grid
        words = np.zeros((len(datas), GF_SIZE), dtype=np.int64)
        for i in range(RS_MAX_K):
            words ^= _GF_MUL[datas[:, i][:, None], _GEN[i][None, :]]
        _codebooks[k] = words[:, RS_MAX_K - k :].copy()  # drop the zero positions
    return _codebooks[k]


def _check_k(k: int) -> None:
    if not 1 <= k <= RS_MAX_K:
        raise ConfigurationError(f"RS data length must be 1..{RS_MAX_K}, got {k}")


def rs_encode(data) -> np.ndarray:
    """Encode k data cells (GF(8) values) into a k+4 cell codeword."""
    data = np.asarray(data, dtype=np.int64)
    _check_k(len(data))
    if data.min(initial=0) < 0 or data.max(initial=0) >= GF_SIZE:
        raise ConfigurationError("RS data cells must be GF(8) elements (0..7)")
    full = np.zeros(RS_MAX_K, dtype=np.int64)
    full[RS_MAX_K - len(data) :] = data
    word = np.zeros(GF_SIZE, dtype=np.int64)
    for i in range(RS_MAX_K):
        word ^= _GF_MUL[full[i], _GEN[i]]
    return word[RS_MAX_K - len(data) :]


def rs_encode_batch(data) -> np.ndarray:
    """Encode many k-cell rows at once (codebook lookup)."""
    data = np.asarray(data, dtype=np.int64)
    k = data.shape[1]
    _check_k(k)
    if data.min(initial=0) < 0 or data.max(initial=0) >= GF_SIZE:
        raise ConfigurationError("RS data cells must be GF(8) elements (0..7)")
    weights = GF_SIZE ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return _codebook(k)[data @ weights]


def rs_decode(received) -> tuple[np.ndarray, int, bool]:
    """Bounded-distance decode of one k+4 cell word.

    Returns (data, corrected_count, ok). On failure (no codeword within
    distance 2) the received data cells come back unchanged with ok=False.
    """
    received = np.asarray(received, dtype=np.int64)
    k = len(received) - RS_PARITY
    _check_k(k)
    data, ncorr, ok = rs_decode_batch(received[None, :])
    return data[0], int(ncorr[0]), bool(ok[0])


def rs_decode_batch(received) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized bounded-distance decode of many codewords (rows)."""
    received = np.asarray(received, dtype=np.int64)
    k = received.shape[1] - RS_PARITY
    _check_k(k)
    if received.min(initial=0) < 0 or received.max(initial=0) >= GF_SIZE:
        raise ConfigurationError("received cells must be GF(8) elements (0..7)")
    book = _codebook(k)
    idx = kernels.rs_scan(received, book, RS_RADIUS)
    ok = idx >= 0
    data = received[:, :k].copy()
    hit = np.where(ok)[0]
    data[hit] = book[idx[hit], :k]
    ncorr = np.zeros(len(received), dtype=np.int64)
    ncorr[hit] = (book[idx[hit]] != received[hit]).sum(axis=1)
    return data, ncorr, ok
