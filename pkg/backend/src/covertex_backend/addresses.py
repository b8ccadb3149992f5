"""Address rendering, re-implemented from the channel's published rules.

The toolkit and this backend must turn a canonical address string into the
same pixels. The normative description lives in the toolkit README
("Address rendering"); this module derives everything from that text and is
cross-validated against PGM fixtures in the parity tests.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

MASK64 = (1 << 64) - 1

GRID = 28
OOD_INTENSITIES = 192
OOD_INTENSITY_BASE = 64
OOD_MAX_PIXELS = 5

SLOT = 4
PAIRS = list(combinations(range(8), 2))

# patch ids: solid, checker, h-stripes, v-stripes, diagonal, anti-diagonal,
# ring, center dot, top half, left half
BITMAPS = np.array(
    [
        [[1] * 4] * 4,
        [[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]],
        [[1] * 4, [0] * 4, [1] * 4, [0] * 4],
        [[1, 0, 1, 0]] * 4,
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],
        [[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],
        [[1, 1, 1, 1], [1, 0, 0, 1], [1, 0, 0, 1], [1, 1, 1, 1]],
        [[0, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]],
        [[1] * 4, [1] * 4, [0] * 4, [0] * 4],
        [[1, 1, 0, 0]] * 4,
    ],
    dtype=np.uint8,
)


class Address:
    __slots__ = ("kind", "seed", "index", "num_patches")

    def __init__(self, kind: str, seed: int, index: int, num_patches: int):
        self.kind = kind
        self.seed = seed
        self.index = index
        self.num_patches = num_patches

    def __repr__(self):
        return f"Address({self.canonical()})"

    def canonical(self) -> str:
        return f"{self.kind}:{self.seed:016x}:{self.index}:{self.num_patches}"


def parse(text: str) -> Address:
    kind, seed_hex, index, patches = text.strip().split(":")
    if kind not in ("ood", "cov"):
        raise ValueError(f"unknown address kind {kind!r}")
    return Address(kind, int(seed_hex, 16), int(index), int(patches))


# --- keyed permutation --------------------------------------------------

def _splitmix(x: int) -> int:
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _permute(index: int, seed: int, domain: int) -> int:
    if domain == 1:
        return 0
    half = max(1, -(-(domain - 1).bit_length() // 2))
    mask = (1 << half) - 1
    x = index
    while True:
        left, right = x >> half, x & mask
        for rnd in range(4):
            f = _splitmix(right ^ _splitmix(seed ^ (rnd * 0x9E3779B97F4A7C15))) & mask
            left, right = right, left ^ f
        x = (left << half) | right
        if x < domain:
            return x


# --- covert decoding ----------------------------------------------------

def covert_space(num_patches: int) -> int:
    if num_patches == 1:
        return 8 * 10 * 10
    if num_patches == 2:
        return len(PAIRS) * 10 * 10 * 10
    raise ValueError(f"unsupported patch count {num_patches}")


def covert_triple(address: Address):
    """(slot locations, patch ids, background class) for a covert address."""
    u = _permute(address.index, address.seed, covert_space(address.num_patches))
    background = u % 10
    u //= 10
    patterns = []
    for _ in range(address.num_patches):
        patterns.append(u % 10)
        u //= 10
    patterns.reverse()
    locations = (u,) if address.num_patches == 1 else PAIRS[u]
    return tuple(locations), tuple(patterns), background


# --- ood decoding -------------------------------------------------------

def _ood_blocks():
    return [OOD_INTENSITIES * math.comb(GRID * GRID, k) for k in range(1, OOD_MAX_PIXELS + 1)]


def _nth_combination(rank: int, n: int, k: int):
    picked = []
    cursor = 0
    for remaining in range(k, 0, -1):
        while True:
            below = math.comb(n - cursor - 1, remaining - 1)
            if rank < below:
                break
            rank -= below
            cursor += 1
        picked.append(cursor)
        cursor += 1
    return picked


def ood_pixels(address: Address):
    """(positions on the 28x28 plane, intensity) for an ood address."""
    u = _permute(address.index, address.seed, sum(_ood_blocks()))
    k = 1
    for size in _ood_blocks():
        if u < size:
            break
        u -= size
        k += 1
    intensity = OOD_INTENSITY_BASE + u % OOD_INTENSITIES
    positions = _nth_combination(u // OOD_INTENSITIES, GRID * GRID, k)
    return positions, intensity


# --- rendering ----------------------------------------------------------

def slot_corners(height: int, width: int):
    far_r, far_c = height - 1 - SLOT, width - 1 - SLOT
    mid_r, mid_c = (height - SLOT) // 2, (width - SLOT) // 2
    return [
        (1, 1), (1, mid_c), (1, far_c), (mid_r, far_c),
        (far_r, far_c), (far_r, mid_c), (far_r, 1), (mid_r, 1),
    ]


def render(address: Address, background: np.ndarray | None = None,
           shape=(28, 28)) -> np.ndarray:
    """Render to a (h, w) uint8 array. Covert addresses patch the given
    background (which must belong to the address's background class)."""
    h, w = shape
    if address.kind == "ood":
        canvas = np.zeros((h, w), dtype=np.uint8)
        positions, intensity = ood_pixels(address)
        for pos in positions:
            canvas[pos // GRID, pos % GRID] = intensity
        return canvas
    if background is None:
        raise ValueError("covert addresses need a background image")
    locations, patterns, _ = covert_triple(address)
    canvas = np.array(background, dtype=np.uint8).reshape(h, w).copy()
    corners = slot_corners(h, w)
    for slot, pattern in zip(locations, patterns):
        r, c = corners[slot]
        canvas[r : r + SLOT, c : c + SLOT] = BITMAPS[pattern] * np.uint8(255)
    return canvas


def fixture_background(class_id: int, shape=(28, 28)) -> np.ndarray:
    return np.full(shape, 10 + 20 * class_id, dtype=np.uint8)


def render_fixture(address: Address, shape=(28, 28)) -> np.ndarray:
    if address.kind == "ood":
        return render(address, shape=shape)
    _, _, background_class = covert_triple(address)
    return render(address, fixture_background(background_class, shape), shape)
