"""Container format, transforms, and the end-to-end compress/decompress paths.

A coded file (extension ``.uqd``) is little-endian throughout:

    offset  size  field
    0       4     magic "UQDC"
    4       1     format version (1)
    5       2     timestep t (u16)
    7       8     dither seed (u64)
    15      1     latent ndim (u8)
    16      4*nd  latent shape dims (u32 each)
    ..      8     schedule digest (first 8 bytes of sha256 of the schedule text)
    ..      1     transform kind (0 identity, 1 block cosine)
    ..      1     transform block size (0 for identity)
    ..      4     model header length (u32)
    ..      var   symbol-model header (see uqdc.entropy.serialize_model)
    ..      4     payload length in bytes (u32)
    ..      var   entropy-coded payload

Parsers read field by field against the remaining length and demand exact
consumption, so truncating or extending a container at any byte offset is
detected. Rate accounting splits at the payload boundary: everything before
the payload bytes is header.

Transforms map data to a channel-major latent (axis 0 = channel). The block
cosine transform is the orthonormal type-II cosine basis per b-by-b block with
one channel per in-block coefficient; energy is preserved, so distortion can
be measured in either domain.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import entropy
from .diffusion import Denoiser, ddim_sample, full_step_path
from .quantizer import QuantizedLatent, dequantize, forward_quantize
from .schedule import VarianceSchedule, schedule_digest

MAGIC = b"UQDC"
VERSION = 1

TRANSFORM_IDENTITY = 0
TRANSFORM_BLOCK_COSINE = 1


class ContainerError(ValueError):
    """Container bytes are malformed, truncated, or inconsistent."""


class IdentityTransform:
    """Wraps data as a single-channel latent; exact inverse."""

    kind = TRANSFORM_IDENTITY
    block = 0

    def analysis(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)[None, ...]

    def synthesis(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent)
        if latent.ndim < 1 or latent.shape[0] != 1:
            raise ValueError("identity latent must have a leading unit axis")
        return latent[0]


class BlockCosineTransform:
    """Orthonormal cosine transform over non-overlapping b-by-b blocks.

    analysis maps an (H, W) array to (b*b, H/b, W/b) with one channel per
    coefficient index, so like-statistics coefficients share an entropy-model
    channel. Both dims must divide by the block size.
    """

    kind = TRANSFORM_BLOCK_COSINE

    def __init__(self, block: int = 8):
        if not 2 <= block <= 255:
            raise ValueError("block size must be in [2, 255]")
        self.block = block

    def _blocks(self, x: np.ndarray) -> np.ndarray:
        b = self.block
        h, w = x.shape
        if h % b or w % b:
            raise ValueError(f"image dims {h}x{w} not divisible by block {b}")
        return x.reshape(h // b, b, w // b, b).transpose(0, 2, 1, 3)

    def analysis(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("block cosine transform expects a 2-D array")
        b = self.block
        coef = scipy.fft.dctn(self._blocks(x), type=2, norm="ortho", axes=(2, 3))
        nh, nw = coef.shape[:2]
        return coef.reshape(nh, nw, b * b).transpose(2, 0, 1)

    def synthesis(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        b = self.block
        if latent.ndim != 3 or latent.shape[0] != b * b:
            raise ValueError(f"latent must be ({b * b}, H/{b}, W/{b})")
        nh, nw = latent.shape[1:]
        coef = latent.transpose(1, 2, 0).reshape(nh, nw, b, b)
        blocks = scipy.fft.idctn(coef, type=2, norm="ortho", axes=(2, 3))
        return blocks.transpose(0, 2, 1, 3).reshape(nh * b, nw * b)


def build_transform(kind: int, block: int):
    if kind == TRANSFORM_IDENTITY:
        return IdentityTransform()
    if kind == TRANSFORM_BLOCK_COSINE:
        return BlockCosineTransform(block)
    raise ContainerError(f"unknown transform kind {kind}")


@dataclass(frozen=True)
class Container:
    """Everything a decoder needs except the schedule itself."""

    t: int
    seed: int
    shape: tuple
    schedule_digest: bytes
    transform_kind: int
    transform_block: int
    model: entropy.SymbolModel
    payload: entropy.CodedPayload


def serialize_container(c: Container) -> bytes:
    if not 0 <= c.t < 1 << 16:
        raise ValueError("t must fit in 16 bits")
    parts = [
        MAGIC,
        struct.pack("<BHQ", VERSION, c.t, c.seed),
        struct.pack("<B", len(c.shape)),
        struct.pack(f"<{len(c.shape)}I", *c.shape),
        c.schedule_digest,
        struct.pack("<BB", c.transform_kind, c.transform_block),
    ]
    model_bytes = entropy.serialize_model(c.model)
    parts.append(struct.pack("<I", len(model_bytes)))
    parts.append(model_bytes)
    parts.append(struct.pack("<I", len(c.payload.data)))
    parts.append(c.payload.data)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerError(
                f"container truncated: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_container(data: bytes) -> Container:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ContainerError("bad magic")
    version, t, seed = r.unpack("<BHQ")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    (ndim,) = r.unpack("<B")
    shape = r.unpack(f"<{ndim}I")
    digest = r.take(8)
    kind, block = r.unpack("<BB")
    (model_len,) = r.unpack("<I")
    model = entropy.deserialize_model(r.take(model_len))
    (payload_len,) = r.unpack("<I")
    payload_data = r.take(payload_len)
    if r.pos != len(data):
        raise ContainerError(f"{len(data) - r.pos} trailing bytes after payload")
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    build_transform(kind, block)  # validates the descriptor
    return Container(
        t=t,
        seed=seed,
        shape=tuple(int(d) for d in shape),
        schedule_digest=digest,
        transform_kind=kind,
        transform_block=block,
        model=model,
        payload=entropy.CodedPayload(data=payload_data, symbol_count=n),
    )


def compress(x: np.ndarray, t: int, vs: VarianceSchedule, tr, seed: int) -> Container:
    """Transform, quantize at timestep t, fit the symbol model, entropy-code."""
    latent = tr.analysis(x)
    q = forward_quantize(latent, vs, t, seed)
    model = entropy.fit_model(q.symbols)
    payload = entropy.encode(q.symbols, model)
    return Container(
        t=t,
        seed=seed,
        shape=q.shape,
        schedule_digest=schedule_digest(vs),
        transform_kind=tr.kind,
        transform_block=tr.block,
        model=model,
        payload=payload,
    )


def decompress(c: Container, d: Denoiser, vs: VarianceSchedule, steps=None) -> np.ndarray:
    """Decode, dequantize, run the reverse sampler to t=0, invert the transform.

    steps defaults to the full integer path t, t-1, ..., 0.
    """
    if c.schedule_digest != schedule_digest(vs):
        raise ContainerError("container was coded under a different schedule")
    symbols = entropy.decode(c.payload, c.model, c.shape)
    q = QuantizedLatent(symbols=symbols, t=c.t, seed=c.seed, shape=c.shape)
    y_t = dequantize(q, vs)
    if steps is None:
        steps = full_step_path(c.t)
    y0 = ddim_sample(y_t, c.t, steps, d, vs)
    tr = build_transform(c.transform_kind, c.transform_block)
    return tr.synthesis(y0)


def rate_of(c: Container):
    """(payload_bits, header_bits), exact; the two sum to the container size."""
    total_bits = 8 * len(serialize_container(c))
    payload_bits = 8 * len(c.payload.data)
    return payload_bits, total_bits - payload_bits


def read_pgm(path) -> np.ndarray:
    """8-bit binary PGM (P5, maxval 255) to a uint8 array of shape (H, W)."""
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise ValueError("PGM header ended early")
        ch = data[pos : pos + 1]
        if ch == b"#":
            pos = data.index(b"\n", pos) + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {fields[0]!r}")
    width, height, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM (maxval 255) is supported")
    pos += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise ValueError("PGM pixel data truncated")
    return pixels.reshape(height, width).copy()


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 array")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        f.write(img.tobytes())


def pgm_to_unit(img: np.ndarray) -> np.ndarray:
    """Map 8-bit pixels to the codec's working range [-1, 1]."""
    return np.asarray(img, dtype=np.float64) / 255.0 * 2.0 - 1.0


def unit_to_pgm(x: np.ndarray) -> np.ndarray:
    """Inverse pixel mapping with round-half-to-even and clipping."""
    return np.clip(np.rint((np.asarray(x) + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)
