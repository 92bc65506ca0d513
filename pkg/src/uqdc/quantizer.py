"""Universal (dithered) quantization in scaled-symbol form, plus a hard variant.

The encoder sends integer symbols

    z = round(√ᾱ_t · y_0 / Δ_t − u),        u_i ~ U[−1/2, 1/2) i.i.d.

and the decoder rebuilds

    ŷ_t = (z + u) · Δ_t.

Because the dither u is shared, the reconstruction error ŷ_t − √ᾱ_t·y_0 is
distributed U(−Δ_t/2, Δ_t/2) and is independent of y_0, which is what lets a
quantizer stand in for the additive noise of a forward diffusion process.
Working on √ᾱ·y/Δ rather than y keeps the coded alphabet at unit spacing for
every timestep, so one probability model family covers all bin widths.

Dither values are never stored: they are regenerated from a 64-bit seed with a
counter-based generator keyed by (seed, element index), so any partition of
the elements across threads reproduces identical values. Rounding is
round-half-to-even throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import VarianceSchedule, delta_at

SYMBOL_MIN = -(2**15)
SYMBOL_MAX = 2**15 - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class AlphabetOverflowError(ValueError):
    """A quantized symbol fell outside [SYMBOL_MIN, SYMBOL_MAX]."""


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be an integer in [0, 2^64)")
    return int(seed)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = (x ^ (x >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class DitherField:
    """Shared dither: i.i.d. U[−1/2, 1/2) values reproducible from the seed."""

    seed: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.size and (v.min() < -0.5 or v.max() >= 0.5):
            raise ValueError("dither values must lie in [-1/2, 1/2)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def sample_dither(seed: int, shape) -> DitherField:
    """Dither for a tensor of the given shape, keyed by (seed, flat index).

    Element i gets splitmix64(seed + (i+1)·golden) mapped to [−1/2, 1/2)
    through its top 53 bits, so regeneration is bit-exact for any shape with
    the same element count and independent of evaluation order.
    """
    seed = _check_seed(seed)
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    idx = np.arange(1, n + 1, dtype=np.uint64)
    words = _splitmix64(np.uint64(seed) + idx * _GOLDEN)
    unit = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return DitherField(seed=seed, values=(unit - 0.5).reshape(shape))


@dataclass(frozen=True)
class QuantizedLatent:
    """Integer symbols plus everything needed to dequantize them."""

    symbols: np.ndarray
    t: int
    seed: int
    shape: tuple

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int32)
        if tuple(s.shape) != tuple(self.shape):
            raise ValueError("symbol array shape disagrees with declared shape")
        s.flags.writeable = False
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "shape", tuple(self.shape))


def _scaled(y0: np.ndarray, vs: VarianceSchedule, t: int) -> np.ndarray:
    if t < 1:
        raise ValueError("quantization needs t >= 1 (t = 0 is clean data)")
    alpha = vs.alpha_at(t)
    return np.sqrt(alpha) * np.asarray(y0, dtype=np.float64) / delta_at(vs, t)


def _to_symbols(rounded: np.ndarray, t: int, seed: int) -> QuantizedLatent:
    if rounded.size and (rounded.min() < SYMBOL_MIN or rounded.max() > SYMBOL_MAX):
        raise AlphabetOverflowError(
            f"symbol range [{rounded.min():.0f}, {rounded.max():.0f}] exceeds "
            f"[{SYMBOL_MIN}, {SYMBOL_MAX}]"
        )
    return QuantizedLatent(
        symbols=rounded.astype(np.int32), t=t, seed=seed, shape=tuple(rounded.shape)
    )


def forward_quantize_with_dither(
    y0: np.ndarray, vs: VarianceSchedule, t: int, dither: DitherField
) -> QuantizedLatent:
    """forward_quantize with an explicit dither field (tests force u here)."""
    scaled = _scaled(y0, vs, t)
    if dither.values.shape != scaled.shape:
        raise ValueError("dither shape disagrees with input shape")
    return _to_symbols(np.rint(scaled - dither.values), t, dither.seed)


def forward_quantize(y0: np.ndarray, vs: VarianceSchedule, t: int, seed: int) -> QuantizedLatent:
    """Quantize clean data to the noise level of timestep t: z = round(√ᾱ_t·y0/Δ_t − u)."""
    return forward_quantize_with_dither(y0, vs, t, sample_dither(seed, np.shape(y0)))


def dequantize(q: QuantizedLatent, vs: VarianceSchedule) -> np.ndarray:
    """ŷ_t = (z + u)·Δ_t with u regenerated from the stored seed."""
    u = sample_dither(q.seed, q.shape).values
    return (q.symbols.astype(np.float64) + u) * delta_at(vs, q.t)


def hard_quantize(y0: np.ndarray, vs: VarianceSchedule, t: int) -> QuantizedLatent:
    """Ablation variant without dither: z = round(√ᾱ_t·y0/Δ_t)."""
    return _to_symbols(np.rint(_scaled(y0, vs, t)), t, 0)


def hard_dequantize(q: QuantizedLatent, vs: VarianceSchedule) -> np.ndarray:
    """Reconstruction z·Δ_t of a hard-quantized latent (no dither to add back)."""
    return q.symbols.astype(np.float64) * delta_at(vs, q.t)
