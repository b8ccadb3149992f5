import socket
import threading

import numpy as np
import pytest

from covertex import channel as ch
from covertex.addresses import canonical_string, gen_address, gen_addresses
from covertex.codec import ReceptionReport
from covertex.errors import BackendError, ConfigurationError


def spec(i, seed=0):
    return gen_address("ood", seed=seed, index=i)


def write_one(backend, address, label, count=1):
    ws = ch.WriteSet(entries=(ch.WriteEntry(address=address, label=label, count=count),))
    return backend.write(ws)


# ---------------------------------------------------------------------------
# rank model
# ---------------------------------------------------------------------------

def test_rank_weights_top2_value():
    w = ch.rank_weights(0.95)
    assert w[0] + w[1] == pytest.approx(0.975)  # top-2 accuracy
    assert w.sum() == pytest.approx(1.0)
    assert w[-1] == w[-2]  # residual mass parked on the last rank


def test_rank_model_p1_always_rank1():
    rng = np.random.default_rng(0)
    assert all(ch.synthetic_rank_model(1.0, rng) == 1 for _ in range(50))


def test_rank_histogram_matches_closed_form():
    p, c, n = 0.9, 10, 1_000_000
    w = ch.rank_weights(p, c)
    rng = np.random.default_rng(42)
    counts = rng.multinomial(n, w)  # same categorical the sampler draws from
    ranks = np.random.default_rng(7)
    sampled = np.bincount(
        [ch.synthetic_rank_model(p, ranks, c) - 1 for _ in range(20_000)], minlength=c
    )
    for k in range(c):
        sd = np.sqrt(20_000 * w[k] * (1 - w[k]))
        assert abs(sampled[k] - 20_000 * w[k]) <= 3 * sd + 1e-9
    assert counts.sum() == n


def test_rank_weights_validation():
    with pytest.raises(ConfigurationError):
        ch.rank_weights(0.0)
    with pytest.raises(ConfigurationError):
        ch.rank_weights(1.5)


# ---------------------------------------------------------------------------
# synthetic channel
# ---------------------------------------------------------------------------

def test_noiseless_write_then_read():
    backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=1.0))
    write_one(backend, spec(0), 5)
    assert all(backend.read(spec(0)) == 5 for _ in range(20))


def test_stochastic_frequency_matches_top1():
    backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.9, rng_seed=3))
    write_one(backend, spec(1), 4)
    counts = backend.read_counts(spec(1), 100_000)
    assert counts[4] / 100_000 == pytest.approx(0.9, abs=0.01)


def test_rank_assignment_reads_are_fixed():
    backend = ch.SyntheticChannel(
        ch.NoisyChannelParams(top1=0.7, mode="rank-assignment", rng_seed=1)
    )
    for i in range(30):
        write_one(backend, spec(i), i % 10)
    for i in range(30):
        first = backend.read(spec(i))
        assert all(backend.read(spec(i)) == first for _ in range(5))


def test_unwritten_address_uniform():
    backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=1.0, rng_seed=0))
    counts = backend.read_counts(spec(99), 10_000)
    assert counts.sum() == 10_000
    assert (counts > 10_000 / 10 * 0.7).all()  # every class visited roughly uniformly


def test_same_seed_reproduces_reads():
    def run():
        backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.8, rng_seed=12))
        for i in range(10):
            write_one(backend, spec(i), i % 8)
        return [backend.read(spec(i % 10)) for i in range(200)]

    assert run() == run()


def test_latent_ranking_only_in_rank_mode():
    stoch = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.9))
    rank = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.9, mode="rank-assignment"))
    write_one(stoch, spec(0), 3)
    write_one(rank, spec(0), 3)
    assert stoch.latent_ranking(spec(0)) is None
    labels, weights = rank.latent_ranking(spec(0))
    assert 3 in labels
    assert weights.tolist() == ch.rank_weights(0.9).tolist()
    assert rank.latent_ranking(spec(5)) is None  # unwritten


def test_read_correlation_repeats_outcomes():
    base = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.5, rng_seed=6))
    corr = ch.SyntheticChannel(
        ch.NoisyChannelParams(top1=0.5, rng_seed=6, read_correlation=0.9)
    )
    for backend in (base, corr):
        write_one(backend, spec(0), 2)

    def repeat_rate(backend):
        seq = [backend.read(spec(0)) for _ in range(4000)]
        return np.mean([seq[i] == seq[i - 1] for i in range(1, len(seq))])

    assert repeat_rate(corr) > repeat_rate(base) + 0.2


def test_duplicate_address_in_one_write_set_rejected():
    with pytest.raises(ConfigurationError):
        ch.WriteSet(
            entries=(
                ch.WriteEntry(address=spec(0), label=1, count=1),
                ch.WriteEntry(address=spec(0), label=2, count=1),
            )
        )


def test_rewrite_across_calls_latest_wins(caplog):
    backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=1.0))
    write_one(backend, spec(0), 1)
    with caplog.at_level("WARNING"):
        write_one(backend, spec(0), 7)
    assert backend.read(spec(0)) == 7
    assert any("rewritten" in r.message for r in caplog.records)


def test_write_set_serialization_round_trip():
    ws = ch.WriteSet(
        entries=tuple(
            ch.WriteEntry(address=spec(i), label=i % 8, count=5) for i in range(4)
        )
    )
    assert ch.WriteSet.deserialize(ws.serialize()).entries == ws.entries


# ---------------------------------------------------------------------------
# learnable channel
# ---------------------------------------------------------------------------

def test_learnable_zero_entries_keeps_baseline():
    backend = ch.LearnableChannel(ch.LearnableChannelParams())
    report = backend.write(ch.WriteSet(entries=()))
    assert report.baseline_accuracy_after == pytest.approx(report.baseline_accuracy_before)


def test_learnable_baseline_monotone_in_load():
    addresses = gen_addresses("ood", seed=0, count=40)
    prev = 1.0
    for count in (1, 5, 20, 80, 300):
        backend = ch.LearnableChannel(ch.LearnableChannelParams(rng_seed=1))
        ws = ch.WriteSet(
            entries=tuple(
                ch.WriteEntry(address=a, label=i % 8, count=count)
                for i, a in enumerate(addresses)
            )
        )
        report = backend.write(ws)
        assert report.baseline_accuracy_after <= prev + 1e-12
        prev = report.baseline_accuracy_after


def test_learnable_success_monotone_in_samples():
    backend = ch.LearnableChannel(ch.LearnableChannelParams(rng_seed=2))
    a = spec(0)
    probs = []
    for count in (1, 5, 20, 60):
        write_one(backend, a, 3, count=count)
        probs.append(backend.success_probability(a))
    assert all(b >= a for a, b in zip(probs, probs[1:]))


def test_learnable_difficulty_deterministic():
    p = ch.LearnableChannelParams(rng_seed=9)
    d1 = ch.LearnableChannel(p)._difficulty_of("ood:0000000000000000:5:0")
    d2 = ch.LearnableChannel(p)._difficulty_of("ood:0000000000000000:5:0")
    assert d1 == d2
    other = ch.LearnableChannel(ch.LearnableChannelParams(rng_seed=10))
    assert other._difficulty_of("ood:0000000000000000:5:0") != d1


# ---------------------------------------------------------------------------
# replay and tracing
# ---------------------------------------------------------------------------

def test_replay_feeds_trace_in_order():
    records = [(canonical_string(spec(i)), i % 10) for i in range(5)]
    backend = ch.ReplayChannel(records)
    for i in range(5):
        assert backend.read(spec(i)) == i % 10
    with pytest.raises(BackendError):
        backend.read(spec(0))  # exhausted


def test_replay_mismatch_and_write_errors():
    backend = ch.ReplayChannel([(canonical_string(spec(1)), 3)])
    with pytest.raises(BackendError):
        backend.read(spec(2))
    with pytest.raises(BackendError):
        write_one(ch.ReplayChannel([]), spec(0), 1)


def test_trace_recorder_round_trip(tmp_path):
    backend = ch.SyntheticChannel(ch.NoisyChannelParams(top1=0.8, rng_seed=5))
    for i in range(8):
        write_one(backend, spec(i), i % 8)
    rec = ch.TraceRecorder(backend)
    seen = [rec.read(spec(i)) for i in range(8)]
    path = tmp_path / "trace.txt"
    ch.save_trace(rec.records, path)
    replay = ch.ReplayChannel(ch.load_trace(path))
    assert [replay.read(spec(i)) for i in range(8)] == seen


# ---------------------------------------------------------------------------
# neural-channel checks
# ---------------------------------------------------------------------------

def _rr(accepted):
    return ReceptionReport("hamming", 0.0 if accepted else 5.0, 1.0, accepted)


def test_check_neural_channel():
    ok = ch.TrainReport(0.99, 0.985, 10, 100)
    assert ch.check_neural_channel(ok, 0.01, [_rr(True), _rr(True)])
    degraded = ch.TrainReport(0.99, 0.97, 10, 100)
    assert not ch.check_neural_channel(degraded, 0.01, [_rr(True)])
    assert not ch.check_neural_channel(ok, 0.01, [_rr(True), _rr(False)])
    with pytest.raises(ConfigurationError):
        ch.check_neural_channel(ok, 0.0, [])


def test_ncc_upper_bound_values():
    assert ch.ncc_upper_bound(61_000, 0.5, 32) == 976_000
    assert ch.ncc_upper_bound(61_000, 0.0, 32) == 0
    assert ch.ncc_upper_bound(23_500_000, 0.95, 32) == pytest.approx(7.144e8)
    with pytest.raises(ConfigurationError):
        ch.ncc_upper_bound(1, 1.5, 32)


# ---------------------------------------------------------------------------
# external backend (protocol client against an in-test stub)
# ---------------------------------------------------------------------------

class _StubServer(threading.Thread):
    """Minimal wire-protocol server: stores labels, echoes deterministically."""

    def __init__(self):
        super().__init__(daemon=True)
        self.sock = socket.create_server(("127.0.0.1", 0))
        self.port = self.sock.getsockname()[1]
        self.cells = {}

    def run(self):
        conn, _ = self.sock.accept()
        f = conn.makefile("rw", encoding="utf-8", newline="\n")
        pending = 0
        for line in f:
            parts = line.strip().split()
            if not parts:
                continue
            cmd = parts[0]
            if cmd == "HELLO":
                f.write(f"OK {parts[1]}\n")
            elif cmd == "RESET":
                self.cells.clear()
                f.write("OK\n")
            elif cmd == "WRITE":
                pending = int(parts[1])
            elif cmd == "S":
                self.cells[parts[1]] = int(parts[2])
                pending -= 1
            elif cmd == "TRAIN":
                f.write("TRAINED 0.99 0.985\n")
            elif cmd == "READ":
                if parts[1] not in self.cells:
                    f.write("ERR unknown address\n")
                else:
                    f.write(f"LABEL {self.cells[parts[1]]}\n")
            elif cmd == "READN":
                counts = [0] * 10
                counts[self.cells.get(parts[1], 0)] = int(parts[2])
                f.write("COUNTS " + " ".join(map(str, counts)) + "\n")
            elif cmd == "QUIT":
                break
            else:
                f.write("ERR unknown command\n")
            f.flush()
        conn.close()


def test_external_channel_protocol():
    server = _StubServer()
    server.start()
    client = ch.ExternalChannel.connect_tcp(f"127.0.0.1:{server.port}", train_epochs=5)
    report = write_one(client, spec(0), 7, count=3)
    assert report.baseline_accuracy_after == pytest.approx(0.985)
    assert report.epochs == 5
    assert client.read(spec(0)) == 7
    counts = client.read_counts(spec(0), 4)
    assert counts[7] == 4
    client.reset()
    with pytest.raises(BackendError):
        client.read(spec(0))  # ERR line surfaces as BackendError
    client.close()
