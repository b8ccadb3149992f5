"""Hot numeric kernels with numba-compiled and pure-numpy/python twins.

The compiled path is the default; set ``COVERTEX_NUMBA=0`` to select the
fallback implementations. Both paths are kept behaviorally identical (same
floating-point summation order, same tie-breaking), which the test suite
asserts directly and ``benchmarks/kernel_bench.py`` times side by side.
"""

from __future__ import annotations

import heapq
import os

import numpy as np


def _numba_requested() -> bool:
    return os.environ.get("COVERTEX_NUMBA", "1").strip().lower() not in (
        "0",
        "false",
        "off",
        "no",
    )


NUMBA_ENABLED = _numba_requested()
if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# ---------------------------------------------------------------------------
# CRC primitives
# ---------------------------------------------------------------------------

def crc_bits_reference(bits, poly: int, width: int) -> int:
    """Bit-serial long division (init 0, MSB-first, no reflection, no XOR-out).

    The slow textbook form; kept as the independent oracle for the
    table-driven implementation.
    """
    mask = (1 << width) - 1
    reg = 0
    for b in bits:
        top = ((reg >> (width - 1)) & 1) ^ (int(b) & 1)
        reg = (reg << 1) & mask
        if top:
            reg ^= poly & mask
    return reg


def crc_table(poly: int, width: int, chunk_bits: int) -> np.ndarray:
    """Lookup table processing ``chunk_bits`` input bits per step."""
    size = 1 << chunk_bits
    tab = np.zeros(size, dtype=np.int64)
    for u in range(size):
        bits = [(u >> (chunk_bits - 1 - i)) & 1 for i in range(chunk_bits)]
        tab[u] = crc_bits_reference(bits, poly, width)
    return tab


def crc_symbols(symbols, table: np.ndarray, width: int, chunk_bits: int) -> int:
    """Table-driven CRC over a symbol sequence of ``chunk_bits``-bit cells."""
    mask = (1 << width) - 1
    cmask = (1 << chunk_bits) - 1
    reg = 0
    for sym in symbols:
        reg = ((reg << chunk_bits) & mask) ^ int(
            table[((reg >> (width - chunk_bits)) ^ int(sym)) & cmask]
        )
    return reg


def crc_symbols_batch(blocks: np.ndarray, table: np.ndarray, width: int, chunk_bits: int) -> np.ndarray:
    """Vectorized CRC of many symbol blocks (rows of ``blocks``)."""
    blocks = np.asarray(blocks, dtype=np.int64)
    mask = (1 << width) - 1
    cmask = (1 << chunk_bits) - 1
    reg = np.zeros(len(blocks), dtype=np.int64)
    for j in range(blocks.shape[1]):
        reg = ((reg << chunk_bits) & mask) ^ table[((reg >> (width - chunk_bits)) ^ blocks[:, j]) & cmask]
    return reg


# ---------------------------------------------------------------------------
# best-first substitution search (CEC core)
#
# Substitution vectors v assign one candidate rank per cell; they are
# explored in order of descending joint log-probability, ties broken by the
# lexicographic order of v (encoded as a mixed-radix integer key, cell 0 in
# the most significant digit). Children differ from their parent by +1 in a
# single coordinate, so scores are monotone along edges and a heap pops the
# global order. Scores are recomputed by full summation (never accumulated
# incrementally) so both implementations and the brute-force oracle agree
# bitwise.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cec_search_numba(logp, labels, k, bps, crc_tab, crc_width, alphabet,
                      depth_limit, collect, order_out, check_crc):
    cells, topk = logp.shape
    stride = np.empty(cells, dtype=np.int64)
    s = 1
    for i in range(cells - 1, -1, -1):
        stride[i] = s
        s *= topk

    cap = depth_limit * cells + 2
    hneg = np.empty(cap, dtype=np.float64)
    hkey = np.empty(cap, dtype=np.int64)
    hn = 0

    tsize = 1
    while tsize < 2 * cap:
        tsize <<= 1
    seen = np.full(tsize, -1, dtype=np.int64)
    tmask = tsize - 1

    cmask = (1 << bps) - 1
    vmask = (1 << crc_width) - 1

    digits = np.empty(cells, dtype=np.int64)

    score0 = 0.0
    for i in range(cells):
        score0 += logp[i, 0]
    hneg[0] = -score0
    hkey[0] = 0
    hn = 1

    perms = 0
    while hn > 0 and perms < depth_limit:
        bneg = hneg[0]
        bkey = hkey[0]
        hn -= 1
        if hn > 0:
            ln = hneg[hn]
            lk = hkey[hn]
            pos = 0
            while True:
                child = 2 * pos + 1
                if child >= hn:
                    break
                if child + 1 < hn and (
                    hneg[child + 1] < hneg[child]
                    or (hneg[child + 1] == hneg[child] and hkey[child + 1] < hkey[child])
                ):
                    child += 1
                if hneg[child] < ln or (hneg[child] == ln and hkey[child] < lk):
                    hneg[pos] = hneg[child]
                    hkey[pos] = hkey[child]
                    pos = child
                else:
                    break
            hneg[pos] = ln
            hkey[pos] = lk

        perms += 1
        if collect:
            order_out[perms - 1] = bkey

        kk = bkey
        for i in range(cells):
            d = kk // stride[i]
            digits[i] = d
            kk -= d * stride[i]

        if check_crc:
            ok = True
            reg = 0
            for i in range(k):
                sym = labels[i, digits[i]]
                if sym < 0 or sym >= alphabet:
                    ok = False
                    break
                reg = ((reg << bps) & vmask) ^ crc_tab[((reg >> (crc_width - bps)) ^ sym) & cmask]
            if ok:
                val = 0
                for i in range(k, cells):
                    sym = labels[i, digits[i]]
                    if sym < 0 or sym >= alphabet:
                        ok = False
                        break
                    val = (val << bps) | sym
                if ok and reg == val:
                    return True, perms, bkey

        for i in range(cells):
            d = digits[i]
            if d + 1 < topk:
                ck = bkey + stride[i]
                slot = ck & tmask
                fresh = True
                while seen[slot] != -1:
                    if seen[slot] == ck:
                        fresh = False
                        break
                    slot = (slot + 1) & tmask
                if fresh:
                    seen[slot] = ck
                    sc = 0.0
                    for j in range(cells):
                        if j == i:
                            sc += logp[j, d + 1]
                        else:
                            sc += logp[j, digits[j]]
                    cneg = -sc
                    pos = hn
                    hn += 1
                    while pos > 0:
                        par = (pos - 1) >> 1
                        if hneg[par] > cneg or (hneg[par] == cneg and hkey[par] > ck):
                            hneg[pos] = hneg[par]
                            hkey[pos] = hkey[par]
                            pos = par
                        else:
                            break
                    hneg[pos] = cneg
                    hkey[pos] = ck
    return False, perms, 0


def _cec_search_python(logp, labels, k, bps, crc_tab, crc_width, alphabet,
                       depth_limit, collect, order_out, check_crc):
    cells, topk = logp.shape
    stride = [topk ** (cells - 1 - i) for i in range(cells)]
    lp = [[float(logp[i, j]) for j in range(topk)] for i in range(cells)]
    lab = [[int(labels[i, j]) for j in range(topk)] for i in range(cells)]
    tab = [int(v) for v in crc_tab]
    cmask = (1 << bps) - 1
    vmask = (1 << crc_width) - 1

    score0 = 0.0
    for i in range(cells):
        score0 += lp[i][0]
    heap = [(-score0, 0)]
    seen = set()

    perms = 0
    while heap and perms < depth_limit:
        _, bkey = heapq.heappop(heap)
        perms += 1
        if collect:
            order_out[perms - 1] = bkey

        digits = []
        kk = bkey
        for i in range(cells):
            d, kk = divmod(kk, stride[i])
            digits.append(d)

        if check_crc:
            ok = True
            reg = 0
            for i in range(k):
                sym = lab[i][digits[i]]
                if sym < 0 or sym >= alphabet:
                    ok = False
                    break
                reg = ((reg << bps) & vmask) ^ tab[((reg >> (crc_width - bps)) ^ sym) & cmask]
            if ok:
                val = 0
                for i in range(k, cells):
                    sym = lab[i][digits[i]]
                    if sym < 0 or sym >= alphabet:
                        ok = False
                        break
                    val = (val << bps) | sym
                if ok and reg == val:
                    return True, perms, bkey

        for i in range(cells):
            d = digits[i]
            if d + 1 < topk:
                ck = bkey + stride[i]
                if ck not in seen:
                    seen.add(ck)
                    sc = 0.0
                    for j in range(cells):
                        if j == i:
                            sc += lp[j][d + 1]
                        else:
                            sc += lp[j][digits[j]]
                    heapq.heappush(heap, (-sc, ck))
    return False, perms, 0


# ---------------------------------------------------------------------------
# bounded-distance decoding by codebook scan (Reed-Solomon at GF(8) scale)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rs_scan_numba(received, codebook, radius):
    m = received.shape[0]
    rows, n = codebook.shape
    out = np.full(m, -1, dtype=np.int64)
    for b in range(m):
        for r in range(rows):
            dist = 0
            for j in range(n):
                if codebook[r, j] != received[b, j]:
                    dist += 1
                    if dist > radius:
                        break
            if dist <= radius:
                out[b] = r
                break
    return out


def _rs_scan_numpy(received, codebook, radius, chunk: int = 256):
    received = np.asarray(received, dtype=np.int64)
    out = np.full(len(received), -1, dtype=np.int64)
    for lo in range(0, len(received), chunk):
        part = received[lo : lo + chunk]
        dists = (part[:, None, :] != codebook[None, :, :]).sum(axis=2)
        best = dists.argmin(axis=1)
        ok = dists[np.arange(len(part)), best] <= radius
        out[lo : lo + chunk][ok] = best[ok]
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    cec_search = _cec_search_numba
    def rs_scan(received, codebook, radius):
        return _rs_scan_numba(
            np.ascontiguousarray(received, dtype=np.int64),
            np.ascontiguousarray(codebook, dtype=np.int64),
            radius,
        )
else:
    cec_search = _cec_search_python
    rs_scan = _rs_scan_numpy


def implementations():
    """Both kernel paths, for equivalence tests and the benchmark script."""
    return {
        "cec_search": {"numba": _cec_search_numba if NUMBA_ENABLED else None,
                       "fallback": _cec_search_python},
        "rs_scan": {"numba": _rs_scan_numba if NUMBA_ENABLED else None,
                    "fallback": _rs_scan_numpy},
    }
