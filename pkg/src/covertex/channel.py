"""Channel backends: write a training plan, read one label per query.

Backends implement ``write(WriteSet) -> TrainReport``, ``read(spec) -> label``
and ``read_counts(spec, n) -> per-class counts``. Two synthetic families are
provided: a noisy channel driven by a top-1 accuracy (rank-assignment mode
fixes each cell's error pattern at write time for benchmark reproduction;
stochastic mode draws i.i.d. reads for multi-read experiments), and a
"learnable" channel that emulates training dynamics (per-address difficulty,
capacity contention) without any real model. A replay backend feeds recorded
traces, and the external backend speaks a line protocol to a real trainer.
"""

from __future__ import annotations

import hashlib
import logging
import math
import socket
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .addresses import AddressSpec, canonical_string, parse_address
from .errors import BackendError, ConfigurationError, FramingError

logger = logging.getLogger(__name__)

DEFAULT_CLASS_COUNT = 10


# ---------------------------------------------------------------------------
# write plans and training reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WriteEntry:
    address: AddressSpec
    label: int
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("sample count must be positive")
        if self.label < 0:
            raise ConfigurationError("labels are non-negative class ids")


@dataclass(frozen=True)
class WriteSet:
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        seen = set()
        for e in entries:
            key = canonical_string(e.address)
            if key in seen:
                raise ConfigurationError(f"duplicate address in write set: {key}")
            seen.add(key)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    @property
    def total_samples(self) -> int:
        return sum(e.count for e in self.entries)

    def serialize(self) -> str:
        return "".join(
            f"{canonical_string(e.address)} {e.label} {e.count}\n" for e in self.entries
        )

    @classmethod
    def deserialize(cls, text: str) -> "WriteSet":
        entries = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FramingError(f"malformed write-set line: {line!r}")
            entries.append(
                WriteEntry(address=parse_address(parts[0]), label=int(parts[1]), count=int(parts[2]))
            )
        return cls(entries=tuple(entries))


@dataclass(frozen=True)
class TrainReport:
    baseline_accuracy_before: float
    baseline_accuracy_after: float
    epochs: int
    total_patched_samples: int

    def __post_init__(self):
        for acc in (self.baseline_accuracy_before, self.baseline_accuracy_after):
            if not 0.0 <= acc <= 1.0:
                raise ConfigurationError(f"accuracy {acc} outside [0, 1]")


def check_neural_channel(report: TrainReport, epsilon: float, receptions) -> bool:
    """True iff baseline degradation is within epsilon and every reception passed."""
    if not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must be in (0, 1)")
    drop = report.baseline_accuracy_before - report.baseline_accuracy_after
    return drop <= epsilon and all(r.accepted for r in receptions)


def ncc_upper_bound(total_params: int, prunable_fraction: float, bits_per_param: int) -> float:
    """White-box storage ceiling: spare parameters times bits per parameter."""
    if not 0.0 <= prunable_fraction <= 1.0:
        raise ConfigurationError("prunable fraction must be in [0, 1]")
    return total_params * prunable_fraction * bits_per_param


# ---------------------------------------------------------------------------
# rank error model
# ---------------------------------------------------------------------------

def rank_weights(p: float, class_count: int = DEFAULT_CLASS_COUNT) -> np.ndarray:
    """Geometric-halving rank masses: P(rank 1) = p, each next rank halves
    the remaining error mass, the final rank absorbing the residual."""
    if not 0.0 < p <= 1.0:
        raise ConfigurationError(f"top-1 accuracy must be in (0, 1], got {p}")
    c = class_count
    w = np.empty(c, dtype=np.float64)
    w[0] = p
    for k in range(1, c - 1):
        w[k] = (1.0 - p) / (1 << k)
    w[c - 1] = (1.0 - p) / (1 << (c - 2))
    return w


def synthetic_rank_model(p: float, rng: np.random.Generator, class_count: int = DEFAULT_CLASS_COUNT) -> int:
    """Sample the likelihood rank (1-based) of a cell's true label."""
    w = rank_weights(p, class_count)
    return int(rng.choice(class_count, p=w)) + 1


# ---------------------------------------------------------------------------
# synthetic noisy channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyChannelParams:
    top1: float
    class_count: int = DEFAULT_CLASS_COUNT
    mode: str = "stochastic"  # "stochastic" | "rank-assignment"
    rng_seed: int = 0
    read_correlation: float = 0.0  # chance a read repeats the previous outcome
    baseline_accuracy: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.top1 <= 1.0:
            raise ConfigurationError(f"top1 must be in (0, 1], got {self.top1}")
        if self.mode not in ("stochastic", "rank-assignment"):
            raise ConfigurationError(f"unknown channel mode {self.mode!r}")
        if not 0.0 <= self.read_correlation < 1.0:
            raise ConfigurationError("read_correlation must be in [0, 1)")


class _SynthCell:
    __slots__ = ("ranked", "label_probs", "last")

    def __init__(self, ranked: np.ndarray, label_probs: np.ndarray):
        self.ranked = ranked
        self.label_probs = label_probs
        self.last = -1


class SyntheticChannel:
    """Synthetic model with a fixed top-1 accuracy.

    rank-assignment mode pins each written cell's full candidate ranking at
    write time (reads are deterministic, the benchmark error model);
    stochastic mode draws an i.i.d. label per read from the cell's
    distribution. Unwritten addresses read as uniform noise.
    """

    def __init__(self, params: NoisyChannelParams):
        self.params = params
        self.class_count = params.class_count
        self._rng = np.random.default_rng(params.rng_seed)
        self._cells: dict[str, _SynthCell] = {}
        self._weights = rank_weights(params.top1, params.class_count)

    def write(self, ws: WriteSet) -> TrainReport:
        c = self.class_count
        m = len(ws.entries)
        labels = np.array([e.label for e in ws.entries], dtype=np.int64)
        if m and (labels.min() < 0 or labels.max() >= c):
            raise ConfigurationError(f"labels must be in [0, {c})")
        if m:
            # Vectorized cell construction: place the true label at its rank
            # (sampled in rank-assignment mode, always rank 1 in stochastic
            # mode where the label's read mass is exactly top1), then fill
            # the remaining ranks with a uniform shuffle of the other labels.
            if self.params.mode == "rank-assignment":
                ranks = self._rng.choice(c, size=m, p=self._weights)  # 0-based
            else:
                ranks = np.zeros(m, dtype=np.int64)
            shuffled = self._rng.permuted(np.tile(np.arange(c, dtype=np.int64), (m, 1)), axis=1)
            distractors = shuffled[shuffled != labels[:, None]].reshape(m, c - 1)
            ranked = np.empty((m, c), dtype=np.int64)
            ranked[np.arange(m), ranks] = labels
            mask = np.arange(c)[None, :] != ranks[:, None]
            ranked[mask] = distractors.reshape(-1)
            label_probs = np.empty((m, c), dtype=np.float64)
            np.put_along_axis(label_probs, ranked, np.broadcast_to(self._weights, (m, c)), axis=1)
            for i, entry in enumerate(ws.entries):
                key = canonical_string(entry.address)
                if key in self._cells:
                    logger.warning("address %s rewritten; latest entry wins", key)
                self._cells[key] = _SynthCell(ranked=ranked[i], label_probs=label_probs[i])
        acc = self.params.baseline_accuracy
        return TrainReport(
            baseline_accuracy_before=acc,
            baseline_accuracy_after=acc,
            epochs=0,
            total_patched_samples=ws.total_samples,
        )

    def _cell(self, address: AddressSpec):
        return self._cells.get(canonical_string(address))

    def read(self, address: AddressSpec) -> int:
        cell = self._cell(address)
        if cell is None:
            return int(self._rng.integers(self.class_count))
        if self.params.mode == "rank-assignment":
            return int(cell.ranked[0])
        rho = self.params.read_correlation
        if rho > 0.0 and cell.last >= 0 and self._rng.random() < rho:
            return cell.last
        out = int(self._rng.choice(self.class_count, p=cell.label_probs))
        cell.last = out
        return out

    def read_counts(self, address: AddressSpec, n: int) -> np.ndarray:
        cell = self._cell(address)
        c = self.class_count
        if cell is None:
            return self._rng.multinomial(n, np.full(c, 1.0 / c))
        if self.params.mode == "rank-assignment":
            counts = np.zeros(c, dtype=np.int64)
            counts[cell.ranked[0]] = n
            return counts
        if self.params.read_correlation > 0.0:
            counts = np.zeros(c, dtype=np.int64)
            for _ in range(n):
                counts[self.read(address)] += 1
            return counts
        return self._rng.multinomial(n, cell.label_probs)

    def latent_ranking(self, address: AddressSpec):
        """Rank-assignment cells expose their pinned ranking to the reader."""
        if self.params.mode != "rank-assignment":
            return None
        cell = self._cell(address)
        if cell is None:
            return None
        return cell.ranked, self._weights


# ---------------------------------------------------------------------------
# learnable channel (training-dynamics stand-in)
# ---------------------------------------------------------------------------

def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class LearnableChannelParams:
    capacity: float = 20000.0
    difficulty_mu: float = 1.0  # log-normal location of per-address difficulty
    difficulty_sigma: float = 0.7
    steepness: float = 1.6
    contention: float = 2.0
    rng_seed: int = 0
    baseline_accuracy: float = 0.99

    def __post_init__(self):
        if self.capacity <= 0:
            raise ConfigurationError("capacity must be positive")
        if self.difficulty_sigma < 0:
            raise ConfigurationError("difficulty sigma must be >= 0")


_BASELINE_KNEE = 4.0


class LearnableChannel:
    """Emulates storing values by training, without a model.

    Each address draws a log-normal difficulty from (seed, address); its
    retrieval success probability is sigmoid(steepness * samples/difficulty
    - contention * load/capacity), so more samples help an address while
    total load hurts everyone, and the reported baseline accuracy decays
    smoothly with load.
    """

    def __init__(self, params: LearnableChannelParams):
        self.params = params
        self.class_count = DEFAULT_CLASS_COUNT
        self.train_epochs = 1
        self._rng = np.random.default_rng(params.rng_seed)
        self._samples: dict[str, int] = {}
        self._labels: dict[str, int] = {}
        self._difficulty: dict[str, float] = {}

    def _difficulty_of(self, key: str) -> float:
        d = self._difficulty.get(key)
        if d is None:
            digest = hashlib.blake2b(
                key.encode(), digest_size=8, key=self.params.rng_seed.to_bytes(8, "big")
            ).digest()
            gen = np.random.default_rng(int.from_bytes(digest, "big"))
            d = float(gen.lognormal(self.params.difficulty_mu, self.params.difficulty_sigma))
            self._difficulty[key] = d
        return d

    @property
    def total_load(self) -> int:
        return sum(self._samples.values())

    def baseline_after(self) -> float:
        p = self.params
        knee = _BASELINE_KNEE
        return p.baseline_accuracy * _sigmoid(knee - p.contention * self.total_load / p.capacity) / _sigmoid(knee)

    def success_probability(self, address: AddressSpec) -> float:
        key = canonical_string(address)
        s = self._samples.get(key, 0)
        if s == 0:
            return 0.0
        p = self.params
        return _sigmoid(
            p.steepness * s / self._difficulty_of(key) - p.contention * self.total_load / p.capacity
        )

    def write(self, ws: WriteSet) -> TrainReport:
        for entry in ws.entries:
            if entry.label >= self.class_count:
                raise ConfigurationError(f"label {entry.label} outside {self.class_count} classes")
            key = canonical_string(entry.address)
            if key in self._samples:
                logger.debug("address %s rewritten with count %d", key, entry.count)
            self._samples[key] = entry.count
            self._labels[key] = entry.label
        return TrainReport(
            baseline_accuracy_before=self.params.baseline_accuracy,
            baseline_accuracy_after=self.baseline_after(),
            epochs=self.train_epochs,
            total_patched_samples=self.total_load,
        )

    def read(self, address: AddressSpec) -> int:
        key = canonical_string(address)
        c = self.class_count
        if key not in self._labels:
            return int(self._rng.integers(c))
        if self._rng.random() < self.success_probability(address):
            return self._labels[key]
        wrong = int(self._rng.integers(c - 1))
        return wrong if wrong < self._labels[key] else wrong + 1

    def read_counts(self, address: AddressSpec, n: int) -> np.ndarray:
        key = canonical_string(address)
        c = self.class_count
        if key not in self._labels:
            return self._rng.multinomial(n, np.full(c, 1.0 / c))
        q = self.success_probability(address)
        hits = int(self._rng.binomial(n, q))
        counts = np.zeros(c, dtype=np.int64)
        counts[self._labels[key]] = hits
        if n - hits:
            others = np.delete(np.arange(c), self._labels[key])
            counts[others] += self._rng.multinomial(n - hits, np.full(c - 1, 1.0 / (c - 1)))
        return counts


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

class ReplayChannel:
    """Feeds back a recorded (address, label) trace, byte for byte."""

    def __init__(self, records, class_count: int = DEFAULT_CLASS_COUNT):
        self._records = list(records)
        self._pos = 0
        self.class_count = class_count

    def write(self, ws: WriteSet) -> TrainReport:
        raise BackendError("replay backends are read-only")

    def read(self, address: AddressSpec) -> int:
        if self._pos >= len(self._records):
            raise BackendError("replay trace exhausted")
        key, label = self._records[self._pos]
        want = canonical_string(address)
        if key != want:
            raise BackendError(f"trace expects a read of {key}, got {want}")
        self._pos += 1
        return label

    def read_counts(self, address: AddressSpec, n: int) -> np.ndarray:
        counts = np.zeros(self.class_count, dtype=np.int64)
        for _ in range(n):
            counts[self.read(address)] += 1
        return counts


class TraceRecorder:
    """Wraps a backend and records every read as a replayable trace."""

    def __init__(self, backend):
        self._backend = backend
        self.class_count = backend.class_count
        self.records: list[tuple[str, int]] = []

    def write(self, ws: WriteSet) -> TrainReport:
        return self._backend.write(ws)

    def read(self, address: AddressSpec) -> int:
        label = self._backend.read(address)
        self.records.append((canonical_string(address), int(label)))
        return label

    def read_counts(self, address: AddressSpec, n: int) -> np.ndarray:
        counts = np.zeros(self.class_count, dtype=np.int64)
        for _ in range(n):
            counts[self.read(address)] += 1
        return counts


def save_trace(records, path: str | Path) -> None:
    Path(path).write_text("".join(f"{key} {label}\n" for key, label in records))


def load_trace(path: str | Path) -> list[tuple[str, int]]:
    records = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FramingError(f"malformed trace line: {line!r}")
        records.append((parts[0], int(parts[1])))
    return records


# ---------------------------------------------------------------------------
# external backend (wire protocol client)
# ---------------------------------------------------------------------------

PROTOCOL_VERSION = 1


class ExternalChannel:
    """Client for the line protocol spoken by a real model backend.

    Commands: HELLO/RESET/WRITE+S+TRAIN/READ/READN and the optional
    FINETUNE/PRUNE; all requests are serialized over one connection.
    """

    def __init__(self, reader, writer, class_count: int = DEFAULT_CLASS_COUNT,
                 train_epochs: int = 10, owned=None):
        self._reader = reader
        self._writer = writer
        self._owned = owned
        self.class_count = class_count
        self.train_epochs = train_epochs
        self._hello()

    @classmethod
    def connect_tcp(cls, address: str, **kwargs) -> "ExternalChannel":
        host, _, port = address.rpartition(":")
        if not host:
            raise ConfigurationError(f"backend address {address!r} is not host:port")
        sock = socket.create_connection((host, int(port)))
        stream = sock.makefile("rw", encoding="utf-8", newline="\n")
        return cls(stream, stream, owned=(sock, stream), **kwargs)

    @classmethod
    def spawn(cls, argv, **kwargs) -> "ExternalChannel":
        proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        return cls(proc.stdout, proc.stdin, owned=(proc,), **kwargs)

    def close(self):
        for item in self._owned or ():
            if isinstance(item, subprocess.Popen):
                if item.stdin:
                    item.stdin.close()
                item.wait(timeout=30)
            else:
                item.close()
        self._owned = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _send(self, line: str) -> None:
        self._writer.write(line + "\n")
        self._writer.flush()

    def _recv(self) -> str:
        line = self._reader.readline()
        if not line:
            raise BackendError("backend closed the connection")
        line = line.rstrip("\n")
        if line.startswith("ERR"):
            raise BackendError(line[3:].strip() or "backend error")
        return line

    def _hello(self):
        self._send(f"HELLO {PROTOCOL_VERSION}")
        resp = self._recv()
        if resp != f"OK {PROTOCOL_VERSION}":
            raise BackendError(f"unexpected handshake response {resp!r}")

    def reset(self):
        self._send("RESET")
        if self._recv() != "OK":
            raise BackendError("RESET failed")

    def write(self, ws: WriteSet) -> TrainReport:
        self._send(f"WRITE {len(ws)}")
        for e in ws.entries:
            self._send(f"S {canonical_string(e.address)} {e.label} {e.count}")
        self._send(f"TRAIN {self.train_epochs}")
        return self._parse_trained(self._recv(), ws.total_samples)

    def _parse_trained(self, resp: str, total: int) -> TrainReport:
        parts = resp.split()
        if len(parts) != 3 or parts[0] != "TRAINED":
            raise BackendError(f"expected TRAINED response, got {resp!r}")
        return TrainReport(
            baseline_accuracy_before=float(parts[1]),
            baseline_accuracy_after=float(parts[2]),
            epochs=self.train_epochs,
            total_patched_samples=total,
        )

    def read(self, address: AddressSpec) -> int:
        self._send(f"READ {canonical_string(address)}")
        resp = self._recv().split()
        if len(resp) != 2 or resp[0] != "LABEL":
            raise BackendError(f"expected LABEL response, got {' '.join(resp)!r}")
        return int(resp[1])

    def read_counts(self, address: AddressSpec, n: int) -> np.ndarray:
        self._send(f"READN {canonical_string(address)} {n}")
        resp = self._recv().split()
        if resp[:1] != ["COUNTS"] or len(resp) != 1 + self.class_count:
            raise BackendError(f"expected {self.class_count} COUNTS, got {' '.join(resp)!r}")
        return np.array([int(v) for v in resp[1:]], dtype=np.int64)

    def finetune(self, fraction: float, epochs: int) -> TrainReport:
        self._send(f"FINETUNE {fraction} {epochs}")
        return self._parse_trained(self._recv(), 0)

    def prune(self, fraction: float) -> None:
        self._send(f"PRUNE {fraction}")
        if self._recv() != "OK":
            raise BackendError("PRUNE failed")
