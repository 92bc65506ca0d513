"""Probability models over integer symbols and lossless entropy coding.

Symbols live on a unit-spacing integer alphabet (the quantizer already folded
the timestep-dependent bin width into its scaling), so a bin's probability is
the model CDF integrated over a unit box:

    p(k) = c(k + 1/2) − c(k − 1/2)

with both tails folded into the boundary bins so the alphabet carries total
mass 1. The coder quantizes those probabilities to integer frequencies summing
to 2^16 per channel, with every bin floored at one quantum so no representable
symbol is ever uncodable. Frequency tables are a pure function of the model's
serialized header bytes: the float32 parameters stored in the header are the
ones the tables are built from.

`cross_entropy_bits` is the idealized code length under the coder's own
quantized table, so measured payload sizes can be audited against it: the gap
is bounded by the coder constant (96 bits of state flush and checksum) plus
byte padding.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from . import _rans
from .quantizer import SYMBOL_MAX, SYMBOL_MIN

SIGMA_FLOOR = 1e-3
MAX_ALPHABET = 1 << 15

_FAMILIES = ("normal", "logistic")


class DecodeError(ValueError):
    """Payload cannot be decoded: truncated, corrupted, or inconsistent."""


@dataclass(frozen=True)
class SymbolModel:
    """Per-channel location/scale density over a shared integer alphabet.

    mu and sigma are held as float32 because that is how they serialize; the
    frequency tables therefore depend only on the serialized header.
    """

    family: str
    mu: np.ndarray
    sigma: np.ndarray
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"family must be one of {_FAMILIES}")
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float32))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float32))
        if mu.ndim != 1 or mu.shape != sigma.shape:
            raise ValueError("mu and sigma must be 1-D with matching length")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise ValueError("model parameters must be finite")
        if not np.all(sigma > 0.0):
            raise ValueError("sigma must be positive")
        if not (SYMBOL_MIN <= self.k_min <= self.k_max <= SYMBOL_MAX):
            raise ValueError("alphabet bounds outside the symbol range")
        if self.k_max - self.k_min + 1 > MAX_ALPHABET:
            raise ValueError(f"alphabet wider than {MAX_ALPHABET} bins")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "k_max", int(self.k_max))

    @property
    def n_channels(self) -> int:
        return self.mu.size

    @property
    def alphabet_size(self) -> int:
        return self.k_max - self.k_min + 1


@dataclass(frozen=True)
class CodedPayload:
    """Entropy-coded bytes; layout: crc32 of the symbol bytes, then the rANS
    word stream. Empty symbol arrays produce zero bytes."""

    data: bytes
    symbol_count: int


def _cdf(m: SymbolModel, channel: int, x: np.ndarray) -> np.ndarray:
    mu = float(m.mu[channel])
    sigma = float(m.sigma[channel])
    z = (np.asarray(x, dtype=np.float64) - mu) / sigma
    if m.family == "normal":
        return ndtr(z)
    return expit(z)


def bin_probability(m: SymbolModel, channel: int, k):
    """Box-filtered probability of symbol k, tails folded into edge bins."""
    karr = np.asarray(k)
    if np.any(karr < m.k_min) or np.any(karr > m.k_max):
        raise ValueError("symbol outside the model alphabet")
    upper = np.where(karr == m.k_max, 1.0, _cdf(m, channel, karr + 0.5))
    lower = np.where(karr == m.k_min, 0.0, _cdf(m, channel, karr - 0.5))
    out = upper - lower
    return float(out) if np.isscalar(k) else out


def _channel_split(symbols: np.ndarray, n_channels: int):
    """Channel id per flattened element. Axis 0 is the channel axis for
    multi-channel data; single-channel models accept any shape."""
    n = symbols.size
    if n_channels == 1:
        return np.zeros(n, dtype=np.int64)
    if symbols.ndim < 2 or symbols.shape[0] != n_channels:
        raise ValueError(
            f"expected axis 0 of length {n_channels} for a {n_channels}-channel model"
        )
    return np.repeat(np.arange(n_channels, dtype=np.int64), n // n_channels)


def fit_model(symbols: np.ndarray, family: str = "normal") -> SymbolModel:
    """Moment-matched model: per-channel mean and scale, sigma floored.

    Axis 0 is the channel axis when symbols.ndim >= 2; a 1-D array is one
    channel. The alphabet is the observed symbol range.
    """
    sym = np.asarray(symbols)
    if sym.size == 0:
        raise ValueError("cannot fit a model to zero symbols")
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}")
    flat = sym.reshape(sym.shape[0], -1) if sym.ndim >= 2 else sym.reshape(1, -1)
    mean = flat.mean(axis=1)
    std = np.maximum(flat.std(axis=1), SIGMA_FLOOR)
    if family == "logistic":
        std = np.maximum(std * np.sqrt(3.0) / np.pi, SIGMA_FLOOR)
    return SymbolModel(
        family=family,
        mu=mean,
        sigma=std,
        k_min=int(sym.min()),
        k_max=int(sym.max()),
    )


def frequency_tables(m: SymbolModel):
    """Integer frequencies per channel: shape (C, A) uint32 summing to 2^16,
    every entry >= 1, plus the cumulative table of shape (C, A+1).

    Quantization is largest-remainder allocation over a budget that reserves
    one quantum per bin, so the result is a deterministic function of the
    model parameters alone.
    """
    a = m.alphabet_size
    ks = np.arange(m.k_min, m.k_max + 1)
    freq = np.empty((m.n_channels, a), dtype=np.uint32)
    budget = _rans.SCALE - a
    for c in range(m.n_channels):
        p = bin_probability(m, c, ks)
        scaled = p * budget
        base = np.floor(scaled).astype(np.int64) + 1
        rem = _rans.SCALE - int(base.sum())
        if rem:
            base += rem // a
            extra = rem % a
            if extra:
                order = np.argsort(-(scaled - np.floor(scaled)), kind="stable")
                base[order[:extra]] += 1
        freq[c] = base
    cum = np.zeros((m.n_channels, a + 1), dtype=np.uint32)
    np.cumsum(freq, axis=1, out=cum[:, 1:])
    return freq, cum


def _symbol_indices(symbols: np.ndarray, m: SymbolModel) -> np.ndarray:
    flat = symbols.reshape(-1).astype(np.int64)
    if flat.size and (flat.min() < m.k_min or flat.max() > m.k_max):
        raise ValueError("symbol outside the model alphabet")
    return flat - m.k_min


def _symbol_crc(symbols: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(symbols, dtype="<i4").tobytes()) & 0xFFFFFFFF


def encode(symbols: np.ndarray, m: SymbolModel) -> CodedPayload:
    """Losslessly code a symbol tensor under the model's frequency tables."""
    sym = np.asarray(symbols)
    if sym.size == 0:
        return CodedPayload(data=b"", symbol_count=0)
    idx = _symbol_indices(sym, m)
    chan = _channel_split(sym, m.n_channels)
    freq, cum = frequency_tables(m)
    stream = _rans.rans_encode(idx, chan, freq, cum)
    data = struct.pack("<I", _symbol_crc(sym)) + stream.astype("<u4").tobytes()
    return CodedPayload(data=data, symbol_count=int(sym.size))


def decode(p: CodedPayload, m: SymbolModel, shape) -> np.ndarray:
    """Recover the symbol tensor; raises DecodeError on any inconsistency."""
    shape = tuple(shape)
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if p.symbol_count != n:
        raise DecodeError(f"payload holds {p.symbol_count} symbols, shape needs {n}")
    if n == 0:
        if p.data:
            raise DecodeError("empty symbol array with nonempty payload")
        return np.zeros(shape, dtype=np.int32)
    if len(p.data) < 4 or (len(p.data) - 4) % 4:
        raise DecodeError("payload length is not a whole word stream")
    (crc_stored,) = struct.unpack_from("<I", p.data)
    stream = np.frombuffer(p.data, dtype="<u4", offset=4).astype(np.uint32)
    dummy = np.empty(n, dtype=np.int32)
    chan = _channel_split(dummy.reshape(shape), m.n_channels)
    _, cum = frequency_tables(m)
    ok, idx = _rans.rans_decode(stream, n, chan, cum)
    if not ok:
        raise DecodeError("rANS stream did not decode cleanly")
    symbols = (idx + m.k_min).astype(np.int32).reshape(shape)
    if _symbol_crc(symbols) != crc_stored:
        raise DecodeError("symbol checksum mismatch")
    return symbols


def cross_entropy_bits(symbols: np.ndarray, m: SymbolModel) -> float:
    """Idealized code length −Σ log2 q(k) under the coder's quantized table.

    The escape floor keeps every alphabet bin at q >= 2^-16, so no symbol can
    contribute an infinite length.
    """
    sym = np.asarray(symbols)
    if sym.size == 0:
        return 0.0
    idx = _symbol_indices(sym, m)
    chan = _channel_split(sym, m.n_channels)
    freq, _ = frequency_tables(m)
    counts = freq[chan, idx].astype(np.float64)
    return float(np.sum(_rans.PRECISION - np.log2(counts)))


def payload_bits(p: CodedPayload) -> int:
    return 8 * len(p.data)


def serialize_model(m: SymbolModel) -> bytes:
    """Header bytes: family u8, channels u32, k_min i32, k_max i32, then
    per-channel mu and sigma as little-endian float32."""
    head = struct.pack(
        "<BIii", _FAMILIES.index(m.family), m.n_channels, m.k_min, m.k_max
    )
    return head + m.mu.astype("<f4").tobytes() + m.sigma.astype("<f4").tobytes()


def deserialize_model(data: bytes) -> SymbolModel:
    base = struct.calcsize("<BIii")
    if len(data) < base:
        raise DecodeError("model header truncated")
    fam, n_ch, k_min, k_max = struct.unpack_from("<BIii", data)
    if fam >= len(_FAMILIES):
        raise DecodeError(f"unknown model family tag {fam}")
    need = base + 8 * n_ch
    if len(data) != need:
        raise DecodeError(f"model header length {len(data)}, expected {need}")
    mu = np.frombuffer(data, dtype="<f4", count=n_ch, offset=base)
    sigma = np.frombuffer(data, dtype="<f4", count=n_ch, offset=base + 4 * n_ch)
    try:
        return SymbolModel(
            family=_FAMILIES[fam], mu=mu, sigma=sigma, k_min=k_min, k_max=k_max
        )
    except ValueError as e:
        raise DecodeError(f"invalid model header: {e}") from e


def model_header_size(n_channels: int) -> int:
    return struct.calcsize("<BIii") + 8 * n_channels
