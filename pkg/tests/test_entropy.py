"""Symbol models, integer frequency tables, and the lossless coder."""

import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from uqdc import (
    CodedPayload,
    DecodeError,
    SymbolModel,
    bin_probability,
    cross_entropy_bits,
    decode,
    deserialize_model,
    encode,
    fit_model,
    frequency_tables,
    payload_bits,
    serialize_model,
)
from uqdc import entropy
from uqdc._rans import PRECISION, RANS_L, SCALE, rans_decode, rans_encode


def std_model(**kw):
    args = dict(family="normal", mu=[0.0], sigma=[1.0], k_min=-8, k_max=8)
    args.update(kw)
    return SymbolModel(**args)


# --- model validation -------------------------------------------------------


def test_model_rejects_bad_family():
    with pytest.raises(ValueError):
        std_model(family="cauchy")


def test_model_rejects_bad_sigma():
    with pytest.raises(ValueError):
        std_model(sigma=[0.0])
    with pytest.raises(ValueError):
        std_model(sigma=[math.nan])


def test_model_rejects_bad_alphabet():
    with pytest.raises(ValueError):
        std_model(k_min=5, k_max=4)
    with pytest.raises(ValueError):
        std_model(k_min=-(2**15) - 1)
    with pytest.raises(ValueError):
        std_model(k_min=-(2**14), k_max=2**14)  # wider than 2^15 bins


def test_model_channel_shape_checks():
    with pytest.raises(ValueError):
        std_model(mu=[0.0, 1.0], sigma=[1.0])


def test_model_params_stored_float32():
    m = std_model(mu=[0.1], sigma=[0.3])
    assert m.mu.dtype == np.float32
    assert m.sigma.dtype == np.float32


# --- bin probabilities ------------------------------------------------------


def test_bin_probability_center_value():
    # Phi(0.5) - Phi(-0.5) for the standard normal
    m = std_model()
    expect = math.erf(0.5 / math.sqrt(2.0))
    assert bin_probability(m, 0, 0) == pytest.approx(expect, rel=1e-12)
    assert bin_probability(m, 0, 0) == pytest.approx(0.38292492254802624, rel=1e-12)


def test_bin_probability_matches_erf_oracle():
    m = std_model(mu=[0.3], sigma=[1.7], k_min=-6, k_max=6)
    mu, sg = float(m.mu[0]), float(m.sigma[0])  # the stored float32 values
    for k in range(-5, 6):  # interior bins
        lo = oracles.normal_cdf((k - 0.5 - mu) / sg)
        hi = oracles.normal_cdf((k + 0.5 - mu) / sg)
        assert bin_probability(m, 0, k) == pytest.approx(float(hi - lo), rel=1e-9)


def test_bin_probability_logistic_matches_oracle():
    m = std_model(family="logistic", mu=[-0.2], sigma=[0.8], k_min=-4, k_max=4)
    mu, sg = float(m.mu[0]), float(m.sigma[0])
    for k in range(-3, 4):
        lo = oracles.logistic_cdf((k - 0.5 - mu) / sg)
        hi = oracles.logistic_cdf((k + 0.5 - mu) / sg)
        assert bin_probability(m, 0, k) == pytest.approx(float(hi - lo), rel=1e-9)


def test_bin_probability_tails_fold_to_one():
    for fam in ("normal", "logistic"):
        for k_min, k_max in ((-8, 8), (-1, 1), (0, 0), (-2, 5)):
            m = std_model(family=fam, mu=[0.4], sigma=[1.3], k_min=k_min, k_max=k_max)
            ks = np.arange(k_min, k_max + 1)
            total = float(np.sum(bin_probability(m, 0, ks)))
            assert total == pytest.approx(1.0, abs=1e-12)


def test_bin_probability_rejects_outside_alphabet():
    m = std_model(k_min=-2, k_max=2)
    with pytest.raises(ValueError):
        bin_probability(m, 0, 3)


# --- fitting ----------------------------------------------------------------


def test_fit_model_recovers_moments(rng):
    sym = rng.normal(3.0, 4.0, size=20_000).round().astype(np.int32)
    m = fit_model(sym)
    assert m.n_channels == 1
    assert float(m.mu[0]) == pytest.approx(sym.mean(), abs=1e-4)
    assert float(m.sigma[0]) == pytest.approx(sym.std(), rel=1e-4)
    assert m.k_min == sym.min() and m.k_max == sym.max()


def test_fit_model_logistic_scale(rng):
    sym = rng.normal(0.0, 5.0, size=20_000).round().astype(np.int32)
    m = fit_model(sym, family="logistic")
    assert float(m.sigma[0]) == pytest.approx(sym.std() * math.sqrt(3.0) / math.pi, rel=1e-4)


def test_fit_model_sigma_floor():
    m = fit_model(np.zeros(100, dtype=np.int32))
    assert m.sigma[0] == np.float32(entropy.SIGMA_FLOOR)


def test_fit_model_channels_on_axis_zero(rng):
    sym = np.stack(
        [
            rng.normal(0.0, 2.0, size=4096).round(),
            rng.normal(10.0, 0.5, size=4096).round(),
        ]
    ).astype(np.int32)
    m = fit_model(sym)
    assert m.n_channels == 2
    assert float(m.mu[1]) == pytest.approx(10.0, abs=0.1)
    assert float(m.sigma[1]) < float(m.sigma[0])


def test_fit_model_rejects_empty():
    with pytest.raises(ValueError):
        fit_model(np.zeros((0,), dtype=np.int32))


# --- frequency tables -------------------------------------------------------


def test_frequency_tables_sum_and_floor():
    for k_min, k_max in ((-8, 8), (-1, 1), (0, 0), (-300, 300)):
        m = std_model(mu=[0.2], sigma=[2.5], k_min=k_min, k_max=k_max)
        freq, cum = frequency_tables(m)
        assert freq.shape == (1, m.alphabet_size)
        assert int(freq.sum()) == SCALE
        assert freq.min() >= 1
        np.testing.assert_array_equal(cum[:, -1], SCALE)
        np.testing.assert_array_equal(np.diff(cum, axis=1), freq)


def test_frequency_tables_follow_probabilities():
    m = std_model(sigma=[2.0], k_min=-8, k_max=8)
    freq, _ = frequency_tables(m)
    ks = np.arange(-8, 9)
    p = bin_probability(m, 0, ks)
    target = np.floor(p * (SCALE - ks.size)) + 1
    assert np.abs(freq[0].astype(np.int64) - target).max() <= 1


def test_frequency_tables_deterministic():
    m = std_model(mu=[0.11], sigma=[1.9])
    f1, c1 = frequency_tables(m)
    f2, c2 = frequency_tables(m)
    np.testing.assert_array_equal(f1, f2)
    np.testing.assert_array_equal(c1, c2)


# --- rANS core --------------------------------------------------------------


def test_rans_round_trip_and_final_state(rng):
    m = std_model(sigma=[2.0])
    freq, cum = frequency_tables(m)
    idx = rng.integers(0, m.alphabet_size, size=5000)
    chan = np.zeros(5000, dtype=np.int64)
    stream = rans_encode(idx, chan, freq, cum)
    ok, out = rans_decode(stream.astype(np.uint32), 5000, chan, cum)
    assert ok
    np.testing.assert_array_equal(out, idx)


def test_rans_stream_word_budget(rng):
    # the state invariant allows at most one emitted word per symbol
    m = std_model(sigma=[2.0])
    freq, cum = frequency_tables(m)
    n = 3000
    idx = rng.integers(0, m.alphabet_size, size=n)
    chan = np.zeros(n, dtype=np.int64)
    stream = rans_encode(idx, chan, freq, cum)
    assert stream.size <= n + 2  # n emissions + two head words


def test_rans_constants():
    assert SCALE == 1 << PRECISION
    assert RANS_L == 1 << 31


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=400))
def test_rans_round_trip_property(seed, n):
    rng = np.random.default_rng(seed)
    a = int(rng.integers(1, 40))
    raw = rng.integers(1, 5000, size=a)
    # rescale to an exact 2^16 total with every entry >= 1
    scaled = np.maximum((raw * (SCALE - a) // raw.sum()).astype(np.int64), 0) + 1
    scaled[0] += SCALE - int(scaled.sum())
    freq = scaled[None, :].astype(np.uint32)
    assert int(freq.sum()) == SCALE and freq.min() >= 1
    cum = np.zeros((1, a + 1), dtype=np.uint32)
    np.cumsum(freq, axis=1, out=cum[:, 1:])
    idx = rng.integers(0, a, size=n)
    chan = np.zeros(n, dtype=np.int64)
    stream = rans_encode(idx, chan, freq, cum)
    ok, out = rans_decode(stream.astype(np.uint32), n, chan, cum)
    assert ok
    np.testing.assert_array_equal(out, idx)


# --- encode / decode --------------------------------------------------------


def draw_symbols(m, n, rng):
    """Sample symbols from the coder's own quantized table."""
    freq, _ = frequency_tables(m)
    cols = []
    for c in range(m.n_channels):
        p = freq[c].astype(np.float64) / SCALE
        cols.append(rng.choice(np.arange(m.k_min, m.k_max + 1), size=n, p=p))
    out = np.stack(cols).astype(np.int32)
    return out[0] if m.n_channels == 1 else out


def test_encode_decode_round_trip(rng):
    m = std_model(sigma=[2.3])
    sym = draw_symbols(m, 10_000, rng)
    p = encode(sym, m)
    assert p.symbol_count == 10_000
    np.testing.assert_array_equal(decode(p, m, sym.shape), sym)


def test_encode_decode_multichannel(rng):
    m = SymbolModel(
        family="normal", mu=[0.0, 4.0, -3.0], sigma=[1.0, 0.5, 2.0], k_min=-12, k_max=12
    )
    sym = draw_symbols(m, 4096, rng)
    p = encode(sym, m)
    np.testing.assert_array_equal(decode(p, m, sym.shape), sym)


def test_encode_decode_skewed_and_tiny(rng):
    m = std_model(mu=[7.6], sigma=[0.2], k_min=0, k_max=15)
    for n in (1, 2, 17):
        sym = draw_symbols(m, n, rng)
        np.testing.assert_array_equal(decode(encode(sym, m), m, sym.shape), sym)


def test_encode_empty():
    m = std_model()
    p = encode(np.zeros((0,), dtype=np.int32), m)
    assert p.data == b"" and p.symbol_count == 0
    assert payload_bits(p) == 0
    out = decode(p, m, (0,))
    assert out.size == 0


def test_decode_count_mismatch(rng):
    m = std_model()
    p = encode(draw_symbols(m, 50, rng), m)
    with pytest.raises(DecodeError):
        decode(p, m, (49,))


def test_decode_nonempty_payload_for_empty_shape():
    m = std_model()
    with pytest.raises(DecodeError):
        decode(CodedPayload(data=b"xxxx", symbol_count=0), m, (0,))


def test_encode_rejects_out_of_alphabet():
    m = std_model(k_min=-2, k_max=2)
    with pytest.raises(ValueError):
        encode(np.array([3], dtype=np.int32), m)


def test_coded_length_near_cross_entropy(rng):
    m = std_model(sigma=[1.8])
    sym = draw_symbols(m, 100_000, rng)
    p = encode(sym, m)
    h = cross_entropy_bits(sym, m)
    assert payload_bits(p) <= 1.01 * h + 128.0


def test_cross_entropy_matches_plain_sum(rng):
    m = std_model(sigma=[1.1], k_min=-5, k_max=5)
    sym = draw_symbols(m, 64, rng)
    freq, _ = frequency_tables(m)
    expect = sum(PRECISION - math.log2(freq[0, s - m.k_min]) for s in sym)
    assert cross_entropy_bits(sym, m) == pytest.approx(expect, rel=1e-12)


def test_cross_entropy_empty():
    assert cross_entropy_bits(np.zeros((0,), dtype=np.int32), std_model()) == 0.0


# --- corruption detection ---------------------------------------------------


def test_truncation_never_silent(rng):
    m = std_model(sigma=[2.0])
    sym = draw_symbols(m, 2000, rng)
    p = encode(sym, m)
    for cut in range(len(p.data)):
        with pytest.raises(DecodeError):
            decode(CodedPayload(data=p.data[:cut], symbol_count=2000), m, sym.shape)


def test_single_byte_flips_detected(rng):
    m = std_model(sigma=[2.0])
    sym = draw_symbols(m, 500, rng)
    p = encode(sym, m)
    for pos in range(len(p.data)):
        broken = bytearray(p.data)
        broken[pos] ^= 0x40
        with pytest.raises(DecodeError):
            decode(CodedPayload(data=bytes(broken), symbol_count=500), m, sym.shape)


def test_trailing_garbage_detected(rng):
    m = std_model(sigma=[2.0])
    sym = draw_symbols(m, 500, rng)
    p = encode(sym, m)
    with pytest.raises(DecodeError):
        decode(CodedPayload(data=p.data + b"\x00\x00\x00\x00", symbol_count=500), m, sym.shape)


# --- model serialization ----------------------------------------------------


def test_model_serialization_round_trip():
    m = SymbolModel(
        family="logistic", mu=[0.25, -1.5], sigma=[1.0, 3.5], k_min=-7, k_max=9
    )
    back = deserialize_model(serialize_model(m))
    assert back.family == m.family
    assert back.k_min == m.k_min and back.k_max == m.k_max
    np.testing.assert_array_equal(back.mu, m.mu)
    np.testing.assert_array_equal(back.sigma, m.sigma)


def test_model_serialization_length():
    m = std_model(mu=[0.0, 1.0], sigma=[1.0, 1.0])
    blob = serialize_model(m)
    assert len(blob) == entropy.model_header_size(2)


def test_model_deserialize_rejects_bad_blobs():
    m = std_model()
    blob = serialize_model(m)
    with pytest.raises(DecodeError):
        deserialize_model(blob[:-1])
    with pytest.raises(DecodeError):
        deserialize_model(blob + b"\x00")
    with pytest.raises(DecodeError):
        deserialize_model(b"")
    bad_family = bytes([len(entropy._FAMILIES)]) + blob[1:]
    with pytest.raises(DecodeError):
        deserialize_model(bad_family)
    # sigma = 0 in the header must be rejected, not crash downstream
    base = struct.calcsize("<BIii")
    zeroed = blob[:base + 4] + struct.pack("<f", 0.0)
    with pytest.raises(DecodeError):
        deserialize_model(zeroed)
