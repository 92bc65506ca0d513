"""Single-lane 64-bit rANS core with 16-bit frequency precision.

Stream layout is an array of uint32 words: words 0..1 hold the final encoder
state (high half first), the rest are renormalization output arranged in the
order the decoder consumes them. The encoder walks symbols in reverse so the
decoder recovers them in forward order. State invariant: x in [2^31, 2^63),
which bounds renormalization to at most one word per symbol and makes the
decoder's refill mask exactly mirror the encoder's emission mask.

Frequency tables are uint32 arrays of shape (channels, alphabet) summing to
2^16 per channel, with cumulative tables one entry wider. Hot loops are
numba-jitted; everything here is deterministic integer arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

PRECISION = 16
SCALE = 1 << PRECISION
RANS_L = 1 << 31

_RANS_L = np.uint64(RANS_L)
_BASE = np.uint64(RANS_L >> PRECISION)
_M32 = np.uint64(0xFFFFFFFF)
_M16 = np.uint64(SCALE - 1)
_P = np.uint64(PRECISION)
_W = np.uint64(32)


@njit(cache=True)
def _encode_core(sym, chan, freq, cum, words):
    """Encode symbol indices in reverse; returns (words_written, final_state)."""
    x = _RANS_L
    wpos = 0
    for k in range(sym.shape[0] - 1, -1, -1):
        c = chan[k]
        s = sym[k]
        f = np.uint64(freq[c, s])
        limit = (_BASE * f) << _W
        while x >= limit:
            words[wpos] = np.uint32(x & _M32)
            wpos += 1
            x >>= _W
        x = ((x // f) << _P) + (x % f) + np.uint64(cum[c, s])
    return wpos, x


@njit(cache=True)
def _decode_core(stream, n, chan, cum, out):
    """Decode n symbol indices; returns (ok, words_consumed, final_state)."""
    if stream.shape[0] < 2:
        return 0, 0, np.uint64(0)
    x = (np.uint64(stream[0]) << _W) | np.uint64(stream[1])
    pos = 2
    a = cum.shape[1] - 1
    for k in range(n):
        row = cum[chan[k]]
        cf = x & _M16
        lo = 0
        hi = a
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if np.uint64(row[mid]) <= cf:
                lo = mid
            else:
                hi = mid
        f = np.uint64(row[lo + 1]) - np.uint64(row[lo])
        x = f * (x >> _P) + cf - np.uint64(row[lo])
        while x < _RANS_L:
            if pos >= stream.shape[0]:
                return 0, pos, x
            x = (x << _W) | np.uint64(stream[pos])
            pos += 1
        out[k] = lo
    return 1, pos, x


def rans_encode(sym_idx: np.ndarray, chan: np.ndarray, freq: np.ndarray,
                cum: np.ndarray) -> np.ndarray:
    """Encode symbol indices (one channel id per element) to a uint32 stream."""
    n = sym_idx.shape[0]
    scratch = np.empty(n + 4, dtype=np.uint32)
    wpos, x = _encode_core(sym_idx, chan, freq, cum, scratch)
    head = np.array([(x >> 32) & 0xFFFFFFFF, x & 0xFFFFFFFF], dtype=np.uint32)
    return np.concatenate([head, scratch[:wpos][::-1]])


def rans_decode(stream: np.ndarray, n: int, chan: np.ndarray, cum: np.ndarray):
    """Decode n symbol indices. Returns (ok, symbols); ok demands the stream
    be consumed exactly and the state return to its initial value."""
    out = np.empty(n, dtype=np.int64)
    ok, pos, x = _decode_core(stream, n, chan, cum, out)
    clean = bool(ok) and pos == stream.shape[0] and int(x) == RANS_L
    return clean, out
