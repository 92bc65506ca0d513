"""Transforms, the container format, and the end-to-end pipeline."""

import math

import numpy as np
import pytest

from uqdc import (
    BlockCosineTransform,
    Container,
    ContainerError,
    DecodeError,
    GmmSource,
    IdentityTransform,
    QuantizedLatent,
    build_transform,
    compress,
    decode,
    decompress,
    dequantize,
    fit_model,
    encode,
    gmm_gaussian_denoiser,
    make_cosine_schedule,
    parse_container,
    pgm_to_unit,
    rate_of,
    read_pgm,
    schedule_digest,
    serialize_container,
    unit_to_pgm,
    write_pgm,
)
from uqdc.entropy import CodedPayload


def gradient_image(h=64, w=64):
    yy, xx = np.mgrid[0:h, 0:w]
    img = 128.0 + 80.0 * np.sin(xx / 9.0) * np.cos(yy / 7.0) + 0.2 * xx
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# --- transforms --------------------------------------------------------------


def test_identity_transform_round_trip(rng):
    tr = IdentityTransform()
    x = rng.normal(size=(16, 16))
    lat = tr.analysis(x)
    assert lat.shape == (1, 16, 16)
    np.testing.assert_array_equal(tr.synthesis(lat), x)


def test_identity_transform_rejects_multi_channel():
    with pytest.raises(ValueError):
        IdentityTransform().synthesis(np.zeros((2, 4)))


def test_block_cosine_round_trip(rng):
    tr = BlockCosineTransform(block=8)
    x = rng.normal(size=(32, 48))
    lat = tr.analysis(x)
    assert lat.shape == (64, 4, 6)
    np.testing.assert_allclose(tr.synthesis(lat), x, atol=1e-10)


def test_block_cosine_preserves_energy(rng):
    tr = BlockCosineTransform(block=4)
    x = rng.normal(size=(20, 20))
    lat = tr.analysis(x)
    assert np.sum(lat**2) == pytest.approx(np.sum(x**2), rel=1e-10)


def test_block_cosine_dc_channel():
    # a constant block has a single nonzero coefficient: DC = b * value
    tr = BlockCosineTransform(block=8)
    lat = tr.analysis(np.full((8, 8), 0.5))
    assert lat[0, 0, 0] == pytest.approx(8 * 0.5, rel=1e-12)
    assert np.abs(lat[1:]).max() < 1e-12


def test_block_cosine_validation():
    with pytest.raises(ValueError):
        BlockCosineTransform(block=1)
    tr = BlockCosineTransform(block=8)
    with pytest.raises(ValueError):
        tr.analysis(np.zeros((30, 32)))  # 30 not divisible by 8
    with pytest.raises(ValueError):
        tr.analysis(np.zeros(64))  # not 2-D
    with pytest.raises(ValueError):
        tr.synthesis(np.zeros((63, 4, 4)))


def test_build_transform_round_trip():
    assert isinstance(build_transform(0, 0), IdentityTransform)
    tr = build_transform(1, 16)
    assert isinstance(tr, BlockCosineTransform) and tr.block == 16
    with pytest.raises(ContainerError):
        build_transform(9, 0)


# --- container bytes ---------------------------------------------------------


def small_container(cos50, rng, shape=(256,), t=9, seed=77):
    y0 = rng.normal(size=shape)
    return compress(y0, t, cos50, IdentityTransform(), seed=seed)


def test_container_round_trip(cos50, rng):
    c = small_container(cos50, rng, shape=(4, 32))
    back = parse_container(serialize_container(c))
    assert back.t == c.t
    assert back.seed == c.seed
    assert back.shape == c.shape
    assert back.schedule_digest == c.schedule_digest
    assert back.transform_kind == c.transform_kind
    assert back.transform_block == c.transform_block
    assert back.model.family == c.model.family
    np.testing.assert_array_equal(back.model.mu, c.model.mu)
    np.testing.assert_array_equal(back.model.sigma, c.model.sigma)
    assert back.payload.data == c.payload.data
    assert back.payload.symbol_count == c.payload.symbol_count


def test_container_serialization_deterministic(cos50, rng):
    y0 = rng.normal(size=100)
    a = compress(y0, 5, cos50, IdentityTransform(), seed=3)
    b = compress(y0, 5, cos50, IdentityTransform(), seed=3)
    assert serialize_container(a) == serialize_container(b)


def test_container_rejects_bad_magic(cos50, rng):
    blob = bytearray(serialize_container(small_container(cos50, rng)))
    blob[0] ^= 0xFF
    with pytest.raises(ContainerError):
        parse_container(bytes(blob))


def test_container_rejects_bad_version(cos50, rng):
    blob = bytearray(serialize_container(small_container(cos50, rng)))
    blob[4] = 200
    with pytest.raises(ContainerError):
        parse_container(bytes(blob))


def test_container_rejects_trailing_bytes(cos50, rng):
    blob = serialize_container(small_container(cos50, rng))
    with pytest.raises(ContainerError):
        parse_container(blob + b"\x00")


def test_container_rejects_every_truncation(cos50, rng):
    blob = serialize_container(small_container(cos50, rng, shape=(64,)))
    for cut in range(len(blob)):
        with pytest.raises((ContainerError, DecodeError)):
            parse_container(blob[:cut])


def test_container_rejects_oversized_t(cos50, rng):
    c = small_container(cos50, rng)
    bad = Container(
        t=1 << 16,
        seed=c.seed,
        shape=c.shape,
        schedule_digest=c.schedule_digest,
        transform_kind=c.transform_kind,
        transform_block=c.transform_block,
        model=c.model,
        payload=c.payload,
    )
    with pytest.raises(ValueError):
        serialize_container(bad)


# --- compress / decompress ---------------------------------------------------


def test_compress_records_inputs(cos50, rng):
    c = small_container(cos50, rng, t=12, seed=99)
    assert c.t == 12
    assert c.seed == 99
    assert c.schedule_digest == schedule_digest(cos50)


def test_receiver_state_matches_sender(cos50, rng):
    # the transmitted noisy latent is reproduced bit-exactly before denoising
    y0 = rng.normal(size=512)
    c = compress(y0, 15, cos50, IdentityTransform(), seed=5)
    q_send = QuantizedLatent(
        symbols=decode(c.payload, c.model, c.shape), t=c.t, seed=c.seed, shape=c.shape
    )
    sent = dequantize(q_send, cos50)
    # recompute the sender side directly
    from uqdc import forward_quantize

    q_ref = forward_quantize(y0[None, ...], cos50, 15, seed=5)
    np.testing.assert_array_equal(q_send.symbols, q_ref.symbols)
    np.testing.assert_array_equal(sent, dequantize(q_ref, cos50))


def test_pre_denoising_error_bounded(cos50, rng):
    # quantization error never exceeds half a bin in the scaled domain
    t = 1
    y0 = rng.normal(size=1000)
    c = compress(y0, t, cos50, IdentityTransform(), seed=8)
    a = cos50.alpha_at(t)
    delta = math.sqrt(12.0 * (1.0 - a))
    q = QuantizedLatent(
        symbols=decode(c.payload, c.model, c.shape), t=t, seed=c.seed, shape=c.shape
    )
    y_hat = dequantize(q, cos50)[0]
    assert np.abs(y_hat - math.sqrt(a) * y0).max() <= 0.5 * delta * (1.0 + 1e-12)


def test_decompress_round_trip_near_clean(cos50, rng):
    src = GmmSource.single(0.0, 1.0)
    y0 = src.sample(2000, rng)
    c = compress(y0, 1, cos50, IdentityTransform(), seed=21)
    out = decompress(c, gmm_gaussian_denoiser(src), cos50)
    assert out.shape == y0.shape
    # at t=1 the bin is ~0.109 wide; reconstruction stays within a few bins
    assert float(np.mean((out - y0) ** 2)) < 0.01


def test_decompress_rejects_wrong_schedule(cos50, rng):
    c = small_container(cos50, rng)
    other = make_cosine_schedule(49)
    with pytest.raises(ContainerError):
        decompress(c, gmm_gaussian_denoiser(GmmSource.single(0, 1)), other)


def test_decompress_detects_payload_corruption(cos50, rng):
    c = small_container(cos50, rng)
    broken = bytearray(c.payload.data)
    broken[len(broken) // 2] ^= 0x10
    bad = Container(
        t=c.t,
        seed=c.seed,
        shape=c.shape,
        schedule_digest=c.schedule_digest,
        transform_kind=c.transform_kind,
        transform_block=c.transform_block,
        model=c.model,
        payload=CodedPayload(data=bytes(broken), symbol_count=c.payload.symbol_count),
    )
    with pytest.raises(DecodeError):
        decompress(bad, gmm_gaussian_denoiser(GmmSource.single(0, 1)), cos50)


def test_decompress_custom_sparse_path(cos50, rng):
    src = GmmSource.single(0.0, 1.0)
    y0 = src.sample(512, rng)
    c = compress(y0, 40, cos50, IdentityTransform(), seed=1)
    d = gmm_gaussian_denoiser(src)
    out = decompress(c, d, cos50, steps=[40, 30, 20, 10, 5, 1, 0])
    assert out.shape == y0.shape
    assert np.all(np.isfinite(out))


def test_decompress_mse_improves_toward_small_t(cos50, rng):
    src = GmmSource.single(0.0, 1.0)
    d = gmm_gaussian_denoiser(src)
    mses = []
    for t in (40, 30, 20, 10, 5, 1):
        y0 = src.sample(20_000, rng)
        c = compress(y0, t, cos50, IdentityTransform(), seed=t)
        out = decompress(c, d, cos50)
        mses.append(float(np.mean((out - y0) ** 2)))
    assert all(b < a for a, b in zip(mses, mses[1:]))


def test_constant_image_compresses_tiny(cos50):
    x = np.zeros((64, 64))
    c = compress(x, 2, cos50, IdentityTransform(), seed=0)
    payload, header = rate_of(c)
    raw_bits = 32 * x.size
    assert payload < 0.01 * raw_bits


def test_alphabet_overflow_propagates(cos50):
    from uqdc import AlphabetOverflowError

    with pytest.raises(AlphabetOverflowError):
        compress(np.array([1e7]), 1, cos50, IdentityTransform(), seed=0)


# --- rate accounting ---------------------------------------------------------


def test_rate_of_sums_to_container_size(cos50, rng):
    c = small_container(cos50, rng, shape=(300,))
    payload, header = rate_of(c)
    assert payload + header == 8 * len(serialize_container(c))
    assert payload == 8 * len(c.payload.data)


def test_rate_of_empty_payload(cos50):
    m = fit_model(np.zeros((1,), dtype=np.int32))
    c = Container(
        t=1,
        seed=0,
        shape=(0,),
        schedule_digest=schedule_digest(cos50),
        transform_kind=0,
        transform_block=0,
        model=m,
        payload=encode(np.zeros((0,), dtype=np.int32), m),
    )
    payload, header = rate_of(c)
    assert payload == 0
    assert header == 8 * len(serialize_container(c))


def test_payload_bits_scale_with_samples(cos50, rng):
    # same model, doubled count: payload bits roughly double
    y0 = rng.normal(size=40_000)
    ca = compress(y0[:20_000], 10, cos50, IdentityTransform(), seed=2)
    cb = compress(np.concatenate([y0[:20_000]] * 2), 10, cos50, IdentityTransform(), seed=2)
    pa, _ = rate_of(ca)
    pb, _ = rate_of(cb)
    assert pb == pytest.approx(2 * pa, rel=0.02)


def test_header_bits_independent_of_content(cos50, rng):
    a = small_container(cos50, rng, shape=(500,))
    b = small_container(cos50, rng, shape=(500,))
    assert rate_of(a)[1] == rate_of(b)[1]


# --- PGM ----------------------------------------------------------------------


def test_pgm_round_trip(tmp_path):
    img = gradient_image(24, 40)
    p = tmp_path / "x.pgm"
    write_pgm(p, img)
    np.testing.assert_array_equal(read_pgm(p), img)


def test_pgm_reader_handles_comments(tmp_path):
    img = np.arange(6, dtype=np.uint8).reshape(2, 3)
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n3 2\n# another\n255\n" + img.tobytes())
    np.testing.assert_array_equal(read_pgm(p), img)


def test_pgm_reader_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(ValueError):
        read_pgm(p)


def test_write_pgm_rejects_wrong_dtype(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "y.pgm", np.zeros((4, 4)))


def test_pixel_mapping_round_trip():
    px = np.arange(256, dtype=np.uint8).reshape(16, 16)
    np.testing.assert_array_equal(unit_to_pgm(pgm_to_unit(px)), px)
    x = pgm_to_unit(px)
    assert x.min() == -1.0 and x.max() == 1.0


def test_image_pipeline_deterministic(cos50, tmp_path, rng):
    img = gradient_image()
    x = pgm_to_unit(img)
    tr = BlockCosineTransform(block=8)
    d = gmm_gaussian_denoiser(GmmSource.single(0.0, 1.0))
    blobs, outs = [], []
    for _ in range(2):
        c = compress(x, 10, cos50, tr, seed=0xC0FFEE)
        blobs.append(serialize_container(c))
        outs.append(unit_to_pgm(decompress(parse_container(blobs[-1]), d, cos50)))
    assert blobs[0] == blobs[1]
    np.testing.assert_array_equal(outs[0], outs[1])
    assert outs[0].shape == img.shape
