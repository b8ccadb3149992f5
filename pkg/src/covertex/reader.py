"""Receiver-side read primitives: repeated queries, majority vote, ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BackendError

DEFAULT_SMOOTHING = 0.1


@dataclass(frozen=True)
class ReadObservation:
    """Per-class outcome counts from n reads of one address."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if self.n < 1:
            raise ValueError("observations need at least one read")
        if counts.min(initial=0) < 0 or counts.sum() != self.n:
            raise ValueError("counts must be non-negative and sum to n")
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class RankedCell:
    """Class labels of one cell ordered by descending smoothed probability.

    Probabilities are strictly positive and sum to one; equal probabilities
    are ordered by ascending label.
    """

    candidates: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        cand = np.asarray(self.candidates, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if cand.shape != probs.shape or cand.ndim != 1 or not len(cand):
            raise ValueError("candidates and probs must be matching 1-D arrays")
        if np.any(probs <= 0.0):
            raise ValueError("ranked probabilities must be positive (smoothed)")
        if np.any(np.diff(probs) > 0.0):
            raise ValueError("ranked probabilities must be non-increasing")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("ranked probabilities must sum to 1")
        object.__setattr__(self, "candidates", cand)
        object.__setattr__(self, "probs", probs)

    @property
    def top(self) -> int:
        return int(self.candidates[0])

    @classmethod
    def from_scores(cls, labels, scores) -> "RankedCell":
        labels = np.asarray(labels, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.float64)
        order = np.lexsort((labels, -scores))
        return cls(candidates=labels[order], probs=scores[order])

    @classmethod
    def from_counts(cls, counts, alpha: float = DEFAULT_SMOOTHING) -> "RankedCell":
        """Additive smoothing: p_k = (count_k + alpha) / (n + alpha * c)."""
        counts = np.asarray(counts, dtype=np.float64)
        n = counts.sum()
        c = len(counts)
        probs = (counts + alpha) / (n + alpha * c)
        return cls.from_scores(np.arange(c), probs)

    @classmethod
    def from_fractions(cls, labels, fractions, n: int, alpha: float = DEFAULT_SMOOTHING) -> "RankedCell":
        """Smooth model fractions as if observed over n reads."""
        fractions = np.asarray(fractions, dtype=np.float64)
        c = len(fractions)
        probs = (fractions * n + alpha) / (n + alpha * c)
        return cls.from_scores(labels, probs)


def _observe(backend, address, n: int) -> ReadObservation:
    read_counts = getattr(backend, "read_counts", None)
    if read_counts is not None:
        counts = np.asarray(read_counts(address, n), dtype=np.int64)
    else:
        counts = np.zeros(backend.class_count, dtype=np.int64)
        for _ in range(n):
            counts[backend.read(address)] += 1
    return ReadObservation(counts=counts, n=n)


def read_majority(backend, address, n: int) -> int:
    """Plurality label over n reads; ties resolve to the smallest label."""
    if n < 1:
        raise ValueError("read count must be at least 1")
    obs = _observe(backend, address, n)
    return int(np.argmax(obs.counts))  # argmax takes the first (smallest) maximum


def read_ranked(backend, address, n: int, alpha: float = DEFAULT_SMOOTHING) -> RankedCell:
    """Empirical ranking of one address from n reads.

    Rank-assignment backends expose their per-address ranking directly
    (the observation is fixed at write time); everything else is ranked
    from smoothed outcome counts.
    """
    if n < 1:
        raise ValueError("read count must be at least 1")
    if alpha <= 0.0:
        raise ValueError("smoothing must be positive")
    latent = getattr(backend, "latent_ranking", None)
    if latent is not None:
        ranking = latent(address)
        if ranking is not None:
            labels, fractions = ranking
            return RankedCell.from_fractions(labels, fractions, n, alpha)
    obs = _observe(backend, address, n)
    return RankedCell.from_counts(obs.counts, alpha)


def read_message(backend, addresses, n: int = 1, alpha: float = DEFAULT_SMOOTHING):
    """Read every address; returns (top-1 label stream, per-address rankings)."""
    if not len(addresses):
        raise ValueError("address list must be non-empty")
    cells = []
    for i, address in enumerate(addresses):
        try:
            cells.append(read_ranked(backend, address, n, alpha))
        except BackendError as exc:
            raise BackendError(f"read failed at address index {i}: {exc}") from exc
    top1 = np.array([cell.top for cell in cells], dtype=np.int64)
    return top1, cells
