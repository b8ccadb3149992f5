"""Sender-side write planning: static sample counts and dynamic allocation."""

from __future__ import annotations

from dataclasses import dataclass

from .channel import TrainReport, WriteEntry, WriteSet
from .errors import ConfigurationError
from .reader import read_majority


@dataclass(frozen=True)
class StaticPolicy:
    samples_per_address: int = 20

    def __post_init__(self):
        if self.samples_per_address < 1:
            raise ConfigurationError("samples_per_address must be >= 1")


@dataclass(frozen=True)
class DynamicPolicy:
    """Incremental allocation: start small, add samples where reads fail.

    ``increment`` defaults to ``initial_samples``; ``plateau_window`` rounds
    without verification-accuracy improvement stop the loop early.
    """

    initial_samples: int = 5
    increment: int | None = None
    per_address_max: int = 80
    plateau_window: int = 3
    round_epochs: int = 1
    verify_reads: int = 1

    def __post_init__(self):
        step = self.increment if self.increment is not None else self.initial_samples
        if min(self.initial_samples, step, self.plateau_window, self.round_epochs, self.verify_reads) < 1:
            raise ConfigurationError("dynamic policy parameters must be positive")
        if self.per_address_max < self.initial_samples:
            raise ConfigurationError("per-address max must be >= initial_samples")

    @property
    def step(self) -> int:
        return self.increment if self.increment is not None else self.initial_samples


def plan_static(symbols, addresses, policy: StaticPolicy) -> WriteSet:
    """One entry per symbol with the policy's fixed sample count."""
    if len(addresses) < len(symbols):
        raise ConfigurationError(
            f"{len(symbols)} symbols need at least as many addresses, got {len(addresses)}"
        )
    return WriteSet(
        entries=tuple(
            WriteEntry(address=addresses[i], label=int(symbols[i]), count=policy.samples_per_address)
            for i in range(len(symbols))
        )
    )


def verify(backend, addresses, expected, n_reads: int = 1) -> set[int]:
    """Indices whose majority read disagrees with the expected symbol."""
    if len(addresses) != len(expected):
        raise ConfigurationError("addresses and expected symbols must align")
    return {
        i
        for i in range(len(addresses))
        if read_majority(backend, addresses[i], n_reads) != int(expected[i])
    }


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    total_samples: int
    verification_accuracy: float
    failing: tuple
    report: TrainReport


def write_dynamic(backend, symbols, addresses, policy: DynamicPolicy):
    """Incrementally add samples for addresses that fail verification.

    Round 0 writes ``initial_samples`` everywhere; each later round bumps
    only the failing addresses by ``step`` (capped at ``per_address_max``).
    Stops when everything verifies, every failing address is at the cap, or
    accuracy has not improved for ``plateau_window`` consecutive rounds.
    Returns the final write set and the per-round history.
    """
    if len(addresses) < len(symbols):
        raise ConfigurationError("not enough addresses for the message")
    n = len(symbols)
    addresses = list(addresses[:n])
    counts = [policy.initial_samples] * n

    def entries(indices):
        return tuple(
            WriteEntry(address=addresses[i], label=int(symbols[i]), count=counts[i])
            for i in indices
        )

    history: list[RoundRecord] = []
    report = backend.write(WriteSet(entries=entries(range(n))))
    best_accuracy = -1.0
    stale_rounds = 0
    round_index = 0
    while True:
        failing = verify(backend, addresses, symbols, policy.verify_reads)
        accuracy = 1.0 - len(failing) / n if n else 1.0
        history.append(
            RoundRecord(
                round_index=round_index,
                total_samples=sum(counts),
                verification_accuracy=accuracy,
                failing=tuple(sorted(failing)),
                report=report,
            )
        )
        if not failing:
            break
        if all(counts[i] >= policy.per_address_max for i in failing):
            break
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            stale_rounds = 0
        else:
            stale_rounds += 1
            if stale_rounds >= policy.plateau_window:
                break
        grew = []
        for i in failing:
            bumped = min(counts[i] + policy.step, policy.per_address_max)
            if bumped != counts[i]:
                counts[i] = bumped
                grew.append(i)
        if not grew:
            break
        report = backend.write(WriteSet(entries=entries(grew)))
        round_index += 1

    final = WriteSet(entries=entries(range(n)))
    return final, history
