"""Deterministic synthetic digit images (MNIST-scale stand-in).

No dataset download is possible in the target environment, so the baseline
task is classifying procedurally drawn digits: a 7x5 glyph font upscaled
onto a 28x28 canvas with per-sample jitter, scale, intensity and noise.
A small CNN reaches >99% test accuracy on it within a few epochs.
"""

from __future__ import annotations

import numpy as np

_FONT = {
    0: ["111", "101", "101", "101", "101", "101", "111"],
    1: ["010", "110", "010", "010", "010", "010", "111"],
    2: ["111", "001", "001", "111", "100", "100", "111"],
    3: ["111", "001", "001", "111", "001", "001", "111"],
    4: ["101", "101", "101", "111", "001", "001", "001"],
    5: ["111", "100", "100", "111", "001", "001", "111"],
    6: ["111", "100", "100", "111", "101", "101", "111"],
    7: ["111", "001", "001", "010", "010", "100", "100"],
    8: ["111", "101", "101", "111", "101", "101", "111"],
    9: ["111", "101", "101", "111", "001", "001", "111"],
}

GLYPHS = np.stack(
    [
        np.array([[int(ch) for ch in row] for row in _FONT[d]], dtype=np.float64)
        for d in range(10)
    ]
)


def _draw(digit: int, rng: np.random.Generator) -> np.ndarray:
    glyph = GLYPHS[digit]
    scale_r = rng.integers(2, 4)  # 14..21 rows tall
    scale_c = rng.integers(3, 5)  # 9..12 cols wide
    block = np.kron(glyph, np.ones((scale_r, scale_c)))
    h, w = block.shape
    canvas = np.zeros((28, 28))
    max_r, max_c = 28 - h, 28 - w
    r0 = rng.integers(2, max(3, max_r - 1))
    c0 = rng.integers(2, max(3, max_c - 1))
    intensity = rng.uniform(170, 255)
    canvas[r0 : r0 + h, c0 : c0 + w] = block * intensity
    canvas += rng.normal(0, 10, canvas.shape)
    return np.clip(canvas, 0, 255).astype(np.uint8)


def make_dataset(n: int, seed: int):
    """n images with balanced labels; returns (images uint8 [n,28,28], labels)."""
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % 10)
    images = np.stack([_draw(int(d), rng) for d in labels])
    return images, labels.astype(np.int64)
