"""Deterministic pre-agreed address spaces and their image renderers.

Two address families:

* ``ood``: patterns far outside the carrier's input distribution; a black
  canvas with a seed-determined set of lit pixels at a per-address intensity.
* ``cov``: covert patches blended into in-distribution background images;
  an address is the triple (patch locations, patch pattern ids, background
  class) drawn from 8 fixed periphery slots and 10 patch patterns.

Both enumerations are bijections from the index range to the pattern space,
composed with a seed-keyed Feistel permutation so the on-the-wire address
sequence is unpredictable without the shared seed. Everything here is pure
integer arithmetic: the same (kind, seed, index, num_patches) always renders
to the same bytes on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, FramingError
from .images import ImageBuffer

SLOT_SIZE = 4
SLOT_COUNT = 8
PATTERN_COUNT = 10
BACKGROUND_CLASSES = 10

# Lit-pixel universe for ood patterns: a virtual 28x28 grayscale plane.
_OOD_GRID = 28
_OOD_POSITIONS = _OOD_GRID * _OOD_GRID
_OOD_INTENSITIES = 192  # 64..255
_OOD_INTENSITY_BASE = 64
_OOD_MAX_LIT = 5

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# seed-keyed index permutation
# ---------------------------------------------------------------------------

def _mix64(x: int) -> int:
    """SplitMix64 finalizer; a well-mixed 64-bit hash."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def keyed_permutation(index: int, seed: int, domain: int) -> int:
    """Bijective seed-keyed shuffle of [0, domain) (cycle-walking Feistel)."""
    if not 0 <= index < domain:
        raise ConfigurationError(f"index {index} outside address space of size {domain}")
    if domain == 1:
        return 0
    half = max(1, (-(-(domain - 1).bit_length() // 2)))
    mask = (1 << half) - 1
    x = index
    while True:
        left, right = x >> half, x & mask
        for rnd in range(4):
            f = _mix64(right ^ _mix64(seed ^ (rnd * 0x9E3779B97F4A7C15))) & mask
            left, right = right, left ^ f
        x = (left << half) | right
        if x < domain:
            return x


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class AddressSpec:
    """One channel address: fully determined by (kind, seed, index, num_patches)."""

    kind: str  # "ood" | "cov"
    seed: int
    index: int
    num_patches: int = 0

    def __post_init__(self):
        if self.kind not in ("ood", "cov"):
            raise ConfigurationError(f"unknown address kind {self.kind!r}")
        if not 0 <= self.seed < (1 << 64):
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.index < 0:
            raise ConfigurationError("index must be non-negative")


@dataclass(frozen=True)
class OodPattern:
    pixels: tuple  # ((x, y, channel), ...) on the virtual grayscale plane
    intensity: int


@dataclass(frozen=True)
class CovertPattern:
    locations: tuple  # strictly increasing slot ids in [0, 8)
    patterns: tuple  # per-location pattern id in [0, 10)
    background_class: int


def address_count(kind: str, num_patches: int = 0) -> int:
    """Size of the enumerable address space."""
    if kind == "cov":
        if num_patches == 1:
            return SLOT_COUNT * PATTERN_COUNT * BACKGROUND_CLASSES
        if num_patches == 2:
            return (
                math.comb(SLOT_COUNT, 2)
                * PATTERN_COUNT**2
                * BACKGROUND_CLASSES
            )
        raise ConfigurationError(f"covert addresses support 1 or 2 patches, got {num_patches}")
    if kind == "ood":
        return _ood_space_size()
    raise ConfigurationError(f"unknown address kind {kind!r}")


def gen_address(kind: str, seed: int, index: int, num_patches: int = 0) -> AddressSpec:
    """Deterministically produce the index-th address of the pre-agreed space."""
    spec = AddressSpec(kind=kind, seed=seed, index=index, num_patches=num_patches)
    if index >= address_count(kind, num_patches):
        raise ConfigurationError(
            f"index {index} outside the {kind} space of {address_count(kind, num_patches)}"
        )
    return spec


def gen_addresses(kind: str, seed: int, count: int, num_patches: int = 0, start: int = 0):
    """The address sequence [start, start+count) as a list of specs."""
    return [gen_address(kind, seed, i, num_patches) for i in range(start, start + count)]


def canonical_string(spec: AddressSpec) -> str:
    return f"{spec.kind}:{spec.seed:016x}:{spec.index}:{spec.num_patches}"


def parse_address(text: str) -> AddressSpec:
    parts = text.strip().split(":")
    if len(parts) != 4:
        raise FramingError(f"malformed address string {text!r}")
    kind, seed_hex, index_s, patches_s = parts
    try:
        return AddressSpec(
            kind=kind,
            seed=int(seed_hex, 16),
            index=int(index_s),
            num_patches=int(patches_s),
        )
    except (ValueError, ConfigurationError) as exc:
        raise FramingError(f"malformed address string {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# covert enumeration
# ---------------------------------------------------------------------------

_PAIRS = list(combinations(range(SLOT_COUNT), 2))  # lexicographic 2-subsets


def covert_pattern(spec: AddressSpec) -> CovertPattern:
    """Decode a covert spec into (locations, patterns, background class)."""
    n = address_count("cov", spec.num_patches)
    u = keyed_permutation(spec.index, spec.seed, n)
    background = u % BACKGROUND_CLASSES
    u //= BACKGROUND_CLASSES
    pats = []
    for _ in range(spec.num_patches):
        pats.append(u % PATTERN_COUNT)
        u //= PATTERN_COUNT
    pats.reverse()
    if spec.num_patches == 1:
        locations = (u,)
    else:
        locations = _PAIRS[u]
    return CovertPattern(
        locations=tuple(locations),
        patterns=tuple(pats),
        background_class=background,
    )


# ---------------------------------------------------------------------------
# ood enumeration
# ---------------------------------------------------------------------------

def _ood_block_sizes():
    return [
        _OOD_INTENSITIES * math.comb(_OOD_POSITIONS, k)
        for k in range(1, _OOD_MAX_LIT + 1)
    ]


def _ood_space_size() -> int:
    return sum(_ood_block_sizes())


def _unrank_combination(rank: int, n: int, k: int) -> tuple:
    """Lexicographic unranking of the rank-th k-subset of range(n)."""
    out = []
    prev = -1
    for slot in range(k, 0, -1):
        c = prev + 1
        while True:
            block = math.comb(n - c - 1, slot - 1)
            if rank < block:
                break
            rank -= block
            c += 1
        out.append(c)
        prev = c
    return tuple(out)


def ood_pattern(spec: AddressSpec) -> OodPattern:
    """Decode an ood spec into its lit-pixel set and intensity.

    Enumeration order (before the keyed shuffle): all 1-pixel patterns, then
    2-pixel, up to 5; within a block, intensity is the fastest dimension, so
    every (pixel set, intensity) pair appears exactly once.
    """
    u = keyed_permutation(spec.index, spec.seed, _ood_space_size())
    k = 1
    for size in _ood_block_sizes():
        if u < size:
            break
        u -= size
        k += 1
    intensity = _OOD_INTENSITY_BASE + u % _OOD_INTENSITIES
    comb_rank = u // _OOD_INTENSITIES
    positions = _unrank_combination(comb_rank, _OOD_POSITIONS, k)
    pixels = tuple((pos % _OOD_GRID, pos // _OOD_GRID, 0) for pos in positions)
    return OodPattern(pixels=pixels, intensity=intensity)


def pattern_of(spec: AddressSpec):
    return covert_pattern(spec) if spec.kind == "cov" else ood_pattern(spec)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

# Ten 4x4 patch bitmaps (1 = lit at 255, 0 = dark).
PATCH_BITMAPS = np.array(
    [
        [[1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1]],  # solid
        [[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]],  # checker
        [[1, 1, 1, 1], [0, 0, 0, 0], [1, 1, 1, 1], [0, 0, 0, 0]],  # h-stripes
        [[1, 0, 1, 0], [1, 0, 1, 0], [1, 0, 1, 0], [1, 0, 1, 0]],  # v-stripes
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]],  # diagonal
        [[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],  # anti-diag
        [[1, 1, 1, 1], [1, 0, 0, 1], [1, 0, 0, 1], [1, 1, 1, 1]],  # ring
        [[0, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]],  # center dot
        [[1, 1, 1, 1], [1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0]],  # top half
        [[1, 1, 0, 0], [1, 1, 0, 0], [1, 1, 0, 0], [1, 1, 0, 0]],  # left half
    ],
    dtype=np.uint8,
)


def slot_rects(height: int, width: int):
    """Top-left corners of the 8 periphery slots, clockwise from the corner.

    Slots hug the border with a 1-pixel margin: four corners plus the four
    edge midpoints. Pairwise disjoint for any canvas of at least 16x16.
    """
    if height < 16 or width < 16:
        raise ConfigurationError("periphery slots need a canvas of at least 16x16")
    top, bot = 1, height - 1 - SLOT_SIZE
    left, right = 1, width - 1 - SLOT_SIZE
    midr, midc = (height - SLOT_SIZE) // 2, (width - SLOT_SIZE) // 2
    return [
        (top, left),
        (top, midc),
        (top, right),
        (midr, right),
        (bot, right),
        (bot, midc),
        (bot, left),
        (midr, left),
    ]


def render(
    spec: AddressSpec,
    image_shape: tuple[int, int, int] = (28, 28, 1),
    background: ImageBuffer | None = None,
    background_label: int | None = None,
) -> ImageBuffer:
    """Render an address to pixels.

    ood: lit pixels on a black canvas, no background allowed. cov: patch
    bitmaps overwrite the slot footprints of a caller-supplied background
    drawn from the spec's background class (pass ``background_label`` to have
    the class checked).
    """
    height, width, channels = image_shape
    if spec.kind == "ood":
        if background is not None:
            raise ConfigurationError("ood addresses render on a blank canvas, not a background")
        if height < _OOD_GRID or width < _OOD_GRID:
            raise ConfigurationError(f"ood patterns need at least {_OOD_GRID}x{_OOD_GRID}")
        pat = ood_pattern(spec)
        canvas = np.zeros((height, width, channels), dtype=np.uint8)
        for x, y, _ in pat.pixels:
            canvas[y, x, :] = pat.intensity
        return ImageBuffer(width=width, height=height, channels=channels, pixels=canvas)

    pat = covert_pattern(spec)
    if background is None:
        raise ConfigurationError("covert addresses require a background image")
    if (background.height, background.width, background.channels) != image_shape:
        raise ConfigurationError("background does not match the requested image shape")
    if background_label is not None and background_label != pat.background_class:
        raise ConfigurationError(
            f"background class {background_label} != address class {pat.background_class}"
        )
    rects = slot_rects(height, width)
    canvas = background.pixels.copy()
    for slot, pattern_id in zip(pat.locations, pat.patterns):
        r0, c0 = rects[slot]
        block = PATCH_BITMAPS[pattern_id] * np.uint8(255)
        canvas[r0 : r0 + SLOT_SIZE, c0 : c0 + SLOT_SIZE, :] = block[:, :, None]
    return ImageBuffer(width=width, height=height, channels=channels, pixels=canvas)


def fixture_background(class_id: int, image_shape: tuple[int, int, int]) -> ImageBuffer:
    """Canonical flat background for renderer-parity fixtures: 10 + 20*class."""
    if not 0 <= class_id < BACKGROUND_CLASSES:
        raise ConfigurationError(f"background class {class_id} out of range")
    h, w, c = image_shape
    value = 10 + 20 * class_id
    return ImageBuffer.from_array(np.full((h, w, c), value, dtype=np.uint8))


def render_fixture(spec: AddressSpec, image_shape: tuple[int, int, int] = (28, 28, 1)) -> ImageBuffer:
    """Render onto the canonical fixture background (covert) or blank (ood)."""
    if spec.kind == "ood":
        return render(spec, image_shape)
    cls = covert_pattern(spec).background_class
    return render(spec, image_shape, background=fixture_background(cls, image_shape))


# ---------------------------------------------------------------------------
# covertness
# ---------------------------------------------------------------------------

def covertness_score(patched, reference) -> np.ndarray:
    """Cosine similarity of each patched image against the mean reference image."""
    if not len(patched) or not len(reference):
        raise ValueError("patched and reference sets must be non-empty")
    ref_shape = (reference[0].height, reference[0].width, reference[0].channels)
    vecs = []
    for img in reference:
        if (img.height, img.width, img.channels) != ref_shape:
            raise ValueError("reference images differ in shape")
        vecs.append(img.flat().astype(np.float64))
    mean_ref = np.mean(vecs, axis=0)
    ref_norm = np.linalg.norm(mean_ref)
    if ref_norm == 0.0:
        raise ValueError("reference set has a zero mean vector")
    out = np.empty(len(patched), dtype=np.float64)
    for i, img in enumerate(patched):
        if (img.height, img.width, img.channels) != ref_shape:
            raise ValueError("patched image shape differs from reference")
        v = img.flat().astype(np.float64)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("patched image is a zero vector")
        out[i] = float(v @ mean_ref / (norm * ref_norm))
    return out
