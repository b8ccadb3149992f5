import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertex import codec
from covertex.errors import ConfigurationError, FramingError
from covertex.images import ImageBuffer, read_pnm, write_pnm


def test_encode_single_byte_msb_first():
    frame = codec.encode_bits(b"\x6d")  # 01101101 -> 011|011|01+0
    assert frame.payload.tolist() == [3, 3, 2]
    assert frame.bit_length == 8


def test_decode_inverse_of_example():
    frame = codec.MessageFrame(bits_per_symbol=3, flags=0, bit_length=8,
                               payload=np.array([3, 3, 2]))
    assert codec.decode_bits(frame) == b"\x6d"


def test_empty_payload_header_only():
    frame = codec.encode_bits(b"")
    assert frame.bit_length == 0
    assert len(frame.payload) == 0
    assert len(frame.to_symbols()) == codec.header_cell_count(3)
    assert codec.decode_bits(frame) == b""


@pytest.mark.parametrize("bits", [1, 2, 3])
def test_round_trip_fixed_payloads(bits):
    for payload in (b"\x00", b"\xff" * 5, bytes(range(256)), b"covert"):
        frame = codec.encode_bits(payload, bits_per_symbol=bits)
        assert codec.decode_bits(frame) == payload
        # and through the symbol stream
        rebuilt = codec.frame_from_symbols(frame.to_symbols(), bits)
        assert codec.decode_bits(rebuilt) == payload


@given(st.binary(max_size=512), st.integers(min_value=1, max_value=3))
@settings(max_examples=60, deadline=None)
def test_round_trip_property(payload, bits):
    frame = codec.encode_bits(payload, bits_per_symbol=bits)
    assert codec.decode_bits(frame) == payload


def test_bits_per_symbol_too_large_for_class_count():
    with pytest.raises(ConfigurationError):
        codec.encode_bits(b"x", bits_per_symbol=4, class_count=10)
    with pytest.raises(ConfigurationError):
        codec.encode_bits(b"x", bits_per_symbol=0)


def test_truncated_stream_is_framing_error():
    frame = codec.encode_bits(b"hello world")
    stream = frame.to_symbols()
    with pytest.raises(FramingError):
        codec.frame_from_symbols(stream[:-1], 3)


def test_extra_trailing_cells_tolerated():
    frame = codec.encode_bits(b"hello")
    stream = np.concatenate([frame.to_symbols(), np.zeros(5, dtype=np.int64)])
    assert codec.decode_bits(codec.frame_from_symbols(stream, 3)) == b"hello"


def test_bad_version_rejected():
    stream = codec.encode_bits(b"x").to_symbols().copy()
    stream[:2] = 7  # clobber the version nibble
    with pytest.raises(FramingError):
        codec.frame_from_symbols(stream, 3)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def _gray(values) -> ImageBuffer:
    arr = np.asarray(values, dtype=np.uint8)
    return ImageBuffer.from_array(arr.reshape(1, -1))


def test_quantize_known_values():
    img = _gray([0, 255, 100, 128])
    assert codec.quantize_image(img).tolist() == [0, 7, 3, 4]


def test_uniform_128_image_all_fours():
    img = ImageBuffer.from_array(np.full((9, 9), 128, dtype=np.uint8))
    assert set(codec.quantize_image(img).tolist()) == {4}


def test_dequantize_midpoints():
    img = codec.dequantize_image([7, 0], 2, 1, 1)
    assert img.flat().tolist() == [240, 16]


def test_quantize_dequantize_bound_exhaustive():
    img = _gray(list(range(256)))
    restored = codec.dequantize_image(codec.quantize_image(img), 256, 1, 1)
    err = np.abs(img.flat() - restored.flat())
    assert err.max() <= 16


def test_quantize_of_dequantize_is_identity():
    symbols = np.arange(8)
    img = codec.dequantize_image(symbols, 8, 1, 1)
    assert codec.quantize_image(img).tolist() == symbols.tolist()


def test_dequantize_count_mismatch():
    with pytest.raises(FramingError):
        codec.dequantize_image([1, 2, 3], 2, 1, 1)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_mape_direct_formula():
    a, b = _gray([10, 20]), _gray([12, 16])
    assert codec.mape(a, b) == pytest.approx(3.0)
    assert codec.mape(a, a) == 0.0
    assert codec.mape(_gray([0, 0, 0]), _gray([255, 255, 255])) == 255.0


def test_mape_dimension_mismatch():
    with pytest.raises(ValueError):
        codec.mape(_gray([1, 2]), _gray([1, 2, 3]))


def _psnr_oracle(a: ImageBuffer, b: ImageBuffer) -> float:
    # independent direct-formula implementation, scalar loop
    total = 0.0
    for x, y in zip(a.flat().tolist(), b.flat().tolist()):
        total += (x - y) ** 2
    mse = total / len(a.flat())
    return math.inf if mse == 0 else 10.0 * math.log10(255.0 * 255.0 / mse)


def test_psnr_identical_is_infinite():
    img = _gray([1, 2, 3])
    assert codec.psnr(img, img) == math.inf


def test_psnr_single_pixel_extremes_zero_db():
    assert codec.psnr(_gray([0]), _gray([255])) == pytest.approx(0.0)


def _smooth_test_image(seed=5, size=64) -> ImageBuffer:
    # gradient plus low-frequency texture, stand-in for a natural photo
    y, x = np.mgrid[0:size, 0:size]
    vals = 96 + 64 * np.sin(x / 9.0) + 48 * np.cos(y / 7.0) + (x + y) / 4.0
    noise = np.random.default_rng(seed).normal(0, 6, (size, size))
    return ImageBuffer.from_array(np.clip(vals + noise, 0, 255).astype(np.uint8))


def test_psnr_matches_oracle_and_quantization_quality():
    img = _smooth_test_image()
    restored = codec.dequantize_image(codec.quantize_image(img), img.width, img.height, 1)
    value = codec.psnr(img, restored)
    assert value == pytest.approx(_psnr_oracle(img, restored), rel=1e-9)
    assert value >= 28.0


def test_mape_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    a = ImageBuffer.from_array(rng.integers(0, 256, (16, 16)).astype(np.uint8))
    b = ImageBuffer.from_array(rng.integers(0, 256, (16, 16)).astype(np.uint8))
    oracle = sum(abs(x - y) for x, y in zip(a.flat().tolist(), b.flat().tolist())) / 256
    assert codec.mape(a, b) == pytest.approx(oracle, rel=1e-9)


def test_symbol_error_rate_cases():
    assert codec.symbol_error_rate([1, 2, 3], [1, 2, 3]) == 0.0
    assert codec.symbol_error_rate([1, 2, 3], [1, 5, 3]) == pytest.approx(1 / 3)
    assert codec.symbol_error_rate([0, 0], [1, 1]) == 1.0
    with pytest.raises(ValueError):
        codec.symbol_error_rate([1], [1, 2])


def test_ser_is_a_metric():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b, c = (rng.integers(0, 8, 20) for _ in range(3))
        dab = codec.symbol_error_rate(a, b)
        assert dab == codec.symbol_error_rate(b, a)
        assert (dab == 0.0) == bool(np.array_equal(a, b))
        assert dab <= codec.symbol_error_rate(a, c) + codec.symbol_error_rate(c, b) + 1e-12


def test_reception_check():
    r = codec.reception_check([1, 2, 3], [1, 2, 3], "hamming", 0)
    assert r.accepted and r.distance == 0.0

    sent = np.zeros(10, dtype=int)
    recv = sent.copy()
    recv[4] = 1  # SER 0.1
    assert codec.reception_check(sent, recv, "hamming", 1).accepted
    assert not codec.reception_check(sent, recv, "hamming", 0).accepted
    with pytest.raises(ValueError):
        codec.reception_check(sent, recv, "manhattan", 1)


def test_reception_check_mape_metric():
    r = codec.reception_check(_gray([10, 20]), _gray([12, 16]), "mape", 3.0)
    assert r.accepted and r.distance == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def test_stream_file_round_trip(tmp_path):
    symbols = np.random.default_rng(0).integers(0, 10, 101)
    path = tmp_path / "msg.cvtx"
    codec.write_stream_file(path, symbols, 3)
    back, bits = codec.read_stream_file(path)
    assert bits == 3
    assert back.tolist() == symbols.tolist()
    assert path.read_bytes()[:4] == b"CVTX"


def test_stream_file_bad_magic(tmp_path):
    path = tmp_path / "bad.cvtx"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(FramingError):
        codec.read_stream_file(path)


def test_pnm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    gray = ImageBuffer.from_array(rng.integers(0, 256, (7, 5)).astype(np.uint8))
    rgb = ImageBuffer.from_array(rng.integers(0, 256, (4, 6, 3)).astype(np.uint8))
    for img, name in ((gray, "a.pgm"), (rgb, "b.ppm")):
        write_pnm(img, tmp_path / name)
        back = read_pnm(tmp_path / name)
        assert back.same_shape(img)
        assert np.array_equal(back.pixels, img.pixels)


def test_image_frame_round_trip():
    img = _smooth_test_image(seed=9, size=16)
    frame = codec.encode_image(img)
    rebuilt = codec.frame_from_symbols(frame.to_symbols(), 3)
    out = codec.decode_image(rebuilt)
    assert out.same_shape(img)
    assert np.array_equal(out.pixels, codec.dequantize_image(
        codec.quantize_image(img), img.width, img.height, 1).pixels)
