"""Monte Carlo harnesses: CEC-vs-RS benchmark, multi-read curves, end-to-end.

Every scenario is deterministic under its seed: trials draw their own
generators from a spawned seed sequence, execution is sequential, and CSV
formatting is fixed, so a fixed seed yields byte-identical reports.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import reader
from .addresses import gen_addresses
from .channel import (
    LearnableChannelParams,
    LearnableChannel,
    NoisyChannelParams,
    SyntheticChannel,
    WriteEntry,
    WriteSet,
    rank_weights,
)
from .codec import reception_check, symbol_error_rate
from .ecc import cec as _cec
from .ecc import rs as _rs
from .errors import ConfigurationError

DATA_ALPHABET = 8


@dataclass(frozen=True)
class BenchReport:
    scenario: str
    parameters: dict
    columns: tuple
    rows: tuple  # tuples aligned with columns
    trials: int
    seed: int

    def to_csv(self) -> str:
        def fmt(v):
            if isinstance(v, float):
                return f"{v:.10g}"
            return str(v)

        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def _spawned_seed(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def _write_all(backend, addresses, labels, count: int = 1):
    entries = tuple(
        WriteEntry(address=addresses[i], label=int(labels[i]), count=count)
        for i in range(len(labels))
    )
    return backend.write(WriteSet(entries=entries))


# ---------------------------------------------------------------------------
# Scenario: CEC vs Reed-Solomon at equal overhead
# ---------------------------------------------------------------------------

def bench_cec_vs_rs(
    top1_levels=(0.95, 0.90, 0.85, 0.80),
    message_cells: int = 10_000,
    k: int = 4,
    seed: int = 0,
    trials: int = 4,
    class_count: int = 10,
) -> BenchReport:
    """Push one random message through the rank-assignment channel per level,
    correct with CEC (CRC-12 framing, k data cells) and with RS at the same
    overhead, and report post-correction cell accuracies.

    Average permutations come in two interpretations: over all blocks
    (depth-limit exhaustions included) and over corrected blocks only,
    where corrected means the block's cells were actually recovered
    (simulation has ground truth, so aliased matches are excluded).
    """
    if message_cells < 1000:
        raise ConfigurationError("cec-vs-rs needs at least 1000 message cells")
    if k != _rs.RS_MAX_K:
        raise ConfigurationError(f"the equal-overhead comparison fixes k={_rs.RS_MAX_K}")

    base_cfg = _cec.select_config(min(top1_levels))
    probe_cfg = dataclasses.replace(base_cfg, data_cells=k)
    wire_cells = _cec.framed_length(message_cells, probe_cfg)
    addresses = gen_addresses("ood", seed=_spawned_seed(seed, 0xADD2), count=wire_cells)

    rows = []
    for level_idx, top1 in enumerate(top1_levels):
        cfg = dataclasses.replace(_cec.select_config(top1), data_cells=k)
        acc_cec = np.empty(trials)
        acc_rs = np.empty(trials)
        perms_all = np.empty(trials)
        perms_corr = np.empty(trials)
        ser_before = np.empty(trials)
        for trial in range(trials):
            rng = np.random.default_rng(_spawned_seed(seed, level_idx, trial, 0))
            message = rng.integers(0, DATA_ALPHABET, message_cells)

            # --- CEC leg -------------------------------------------------
            backend = SyntheticChannel(
                NoisyChannelParams(
                    top1=top1,
                    class_count=class_count,
                    mode="rank-assignment",
                    rng_seed=_spawned_seed(seed, level_idx, trial, 1),
                )
            )
            framed = _cec.frame_with_checksums(message, cfg)
            _write_all(backend, addresses[: len(framed)], framed)
            top1_stream, cells = reader.read_message(
                backend, addresses[: len(framed)], n=1
            )
            raw = _cec.deframe(top1_stream, cfg, message_cells)
            ser_before[trial] = symbol_error_rate(message, raw)
            corrected, results = _cec.correct_stream(cells, cfg)
            acc_cec[trial] = float(np.mean(corrected[:message_cells] == message))
            tried = np.array([r.permutations_tried for r in results], dtype=np.float64)
            truth_blocks = framed.reshape(-1, cfg.block_cells)
            recovered = np.array(
                [np.array_equal(r.symbols, truth_blocks[i]) for i, r in enumerate(results)],
                dtype=bool,
            )
            perms_all[trial] = tried.mean()
            perms_corr[trial] = tried[recovered].mean() if recovered.any() else 0.0

            # --- RS leg at the same overhead ------------------------------
            rs_backend = SyntheticChannel(
                NoisyChannelParams(
                    top1=top1,
                    class_count=class_count,
                    mode="rank-assignment",
                    rng_seed=_spawned_seed(seed, level_idx, trial, 2),
                )
            )
            codewords = _rs.rs_encode_batch(message.reshape(-1, k)).reshape(-1)
            _write_all(rs_backend, addresses[: len(codewords)], codewords)
            received = np.array(
                [rs_backend.read(a) for a in addresses[: len(codewords)]], dtype=np.int64
            )
            # labels outside the GF(8) alphabet are protocol errors; decode
            # needs a field element, 0 by convention
            received[received >= DATA_ALPHABET] = 0
            decoded, _, _ = _rs.rs_decode_batch(received.reshape(-1, k + _rs.RS_PARITY))
            acc_rs[trial] = float(np.mean(decoded.reshape(-1)[:message_cells] == message))

        rows.append(
            (
                "cec-vs-rs",
                seed,
                trials,
                top1,
                float(acc_cec.mean()),
                float(acc_rs.mean()),
                float(perms_all.mean()),
                float(perms_corr.mean()),
                float(ser_before.mean()),
                float(1.0 - acc_cec.mean()),
            )
        )

    return BenchReport(
        scenario="cec-vs-rs",
        parameters={"message_cells": message_cells, "k": k},
        columns=(
            "scenario",
            "seed",
            "trials",
            "top1",
            "cec_accuracy",
            "rs_accuracy",
            "avg_permutations",
            "avg_permutations_corrected",
            "ser_before",
            "ser_after",
        ),
        rows=tuple(rows),
        trials=trials,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Scenario: multi-read plurality success
# ---------------------------------------------------------------------------

def multiread_distribution(p: float, distractor_model: str = "uniform",
                           class_count: int = 10, true_label: int = 0) -> np.ndarray:
    """Per-class read distribution with the true label carrying mass p."""
    if distractor_model == "uniform":
        probs = np.full(class_count, (1.0 - p) / (class_count - 1))
        probs[true_label] = p
        return probs
    if distractor_model == "geometric":
        w = rank_weights(p, class_count)
        probs = np.empty(class_count)
        others = [lab for lab in range(class_count) if lab != true_label]
        probs[true_label] = w[0]
        probs[others] = w[1:]
        return probs
    raise ConfigurationError(f"unknown distractor model {distractor_model!r}")


def mc_multiread(
    p: float,
    distractor_model: str = "uniform",
    n_values=(1, 3, 10, 20, 50),
    trials: int = 20_000,
    seed: int = 0,
    class_count: int = 10,
    true_label: int = 0,
) -> BenchReport:
    """Fraction of trials where the plurality of n reads equals the true label
    (ties resolve to the smallest label, matching the read primitive)."""
    probs = multiread_distribution(p, distractor_model, class_count, true_label)
    rows = []
    for j, n in enumerate(n_values):
        if n < 1:
            raise ConfigurationError("read counts must be positive")
        rng = np.random.default_rng(_spawned_seed(seed, j))
        counts = rng.multinomial(n, probs, size=trials)
        success = float(np.mean(counts.argmax(axis=1) == true_label))
        rows.append(("multiread", seed, trials, p, distractor_model, n, success))
    return BenchReport(
        scenario="multiread",
        parameters={"p": p, "distractor_model": distractor_model},
        columns=("scenario", "seed", "trials", "p", "distractor_model", "n", "success"),
        rows=tuple(rows),
        trials=trials,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Scenario: end-to-end pipeline
# ---------------------------------------------------------------------------

def bench_end_to_end(
    backend_params,
    message_cells=10_000,
    n_reads: int = 1,
    use_cec: bool = False,
    seed: int = 0,
    samples_per_address: int | None = None,
    top1_hint: float = 0.9,
) -> BenchReport:
    """Encode -> write -> read -> (optionally correct) -> compare.

    ``message_cells`` may be a single size or a sequence of sizes (one row
    each, fresh backend per size, e.g. for capacity sweeps on the learnable
    channel).
    """
    sizes = message_cells if np.iterable(message_cells) else (message_cells,)
    if use_cec:
        top1 = getattr(backend_params, "top1", top1_hint)
        cfg = _cec.select_config(top1)
    else:
        cfg = None

    wire_max = max(
        _cec.framed_length(size, cfg) if cfg else size for size in sizes
    )
    addresses = gen_addresses("ood", seed=_spawned_seed(seed, 0xADD2), count=wire_max)

    rows = []
    for idx, size in enumerate(sizes):
        rng = np.random.default_rng(_spawned_seed(seed, idx, 0xE2E))
        message = rng.integers(0, DATA_ALPHABET, size)
        if isinstance(backend_params, NoisyChannelParams):
            backend = SyntheticChannel(backend_params)
            count = samples_per_address or 1
        elif isinstance(backend_params, LearnableChannelParams):
            backend = LearnableChannel(backend_params)
            count = samples_per_address or 20
        else:
            raise ConfigurationError(f"unsupported backend params {type(backend_params)!r}")

        wire = _cec.frame_with_checksums(message, cfg) if cfg else message
        report = _write_all(backend, addresses[: len(wire)], wire, count=count)
        top1_stream, cells = reader.read_message(backend, addresses[: len(wire)], n=n_reads)

        if cfg:
            raw = _cec.deframe(top1_stream, cfg, size)
            corrected, _ = _cec.correct_stream(cells, cfg)
            final = corrected[:size]
        else:
            raw = top1_stream
            final = raw
        ser_before = symbol_error_rate(message, raw)
        ser_after = symbol_error_rate(message, final)
        reception = reception_check(message, final, "hamming", 0)
        rows.append(
            (
                "end-to-end",
                seed,
                1,
                size,
                n_reads,
                int(use_cec),
                float(ser_before),
                float(ser_after),
                int(reception.accepted),
                float(report.baseline_accuracy_after),
            )
        )
    return BenchReport(
        scenario="end-to-end",
        parameters={"n_reads": n_reads, "use_cec": use_cec},
        columns=(
            "scenario",
            "seed",
            "trials",
            "message_cells",
            "n_reads",
            "cec",
            "ser_before",
            "ser_after",
            "accepted",
            "baseline_after",
        ),
        rows=tuple(rows),
        trials=1,
        seed=seed,
    )
