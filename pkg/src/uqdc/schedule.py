"""Variance schedules and the quantization step-size schedule derived from them.

Conventions used across the package:

* ``t = 0`` is clean data, ``t = n_steps`` is maximum noise.
* ``alpha_bar[t]`` (written ᾱ_t) is the cumulative signal-retention factor of
  the forward process ``y_t = √ᾱ_t · y_0 + √(1−ᾱ_t) · ε``.
* The quantization step size is chosen so that the quantizer's uniform error
  carries the same power as the diffusion noise it replaces:

      Δ_t = √(12 · (1 − ᾱ_t)),   so   Var[U(−Δ_t/2, Δ_t/2)] = 1 − ᾱ_t.

Stored ᾱ values are clipped into the open interval (ALPHA_MIN, ALPHA_MAX) so
that Δ_t stays positive and SNR stays finite on every code path that indexes a
schedule. The reverse sampler treats t = 0 as exactly clean; see
:func:`uqdc.diffusion.sampling_alpha`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

ALPHA_MIN = 1e-6
ALPHA_MAX = 1.0 - 1e-6


@dataclass(frozen=True)
class VarianceSchedule:
    """Cumulative signal-retention factors ᾱ_0 … ᾱ_N of a forward process.

    ``alphas[t]`` is ᾱ_t. Values must lie in (0, 1) and decrease strictly
    with t. Instances are immutable and safe to share across threads.
    """

    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("schedule needs at least alpha_bar[0] and alpha_bar[1]")
        if not np.all((a > 0.0) & (a < 1.0)):
            raise ValueError("every alpha_bar must lie strictly inside (0, 1)")
        if not np.all(np.diff(a) < 0.0):
            raise ValueError("alpha_bar must decrease strictly with t")
        a.flags.writeable = False
        object.__setattr__(self, "alphas", a)

    @property
    def n_steps(self) -> int:
        return self.alphas.size - 1

    def alpha_at(self, t: int) -> float:
        if not 0 <= t <= self.n_steps:
            raise IndexError(f"t={t} outside [0, {self.n_steps}]")
        return float(self.alphas[t])


@dataclass(frozen=True)
class QuantizationSchedule:
    """Step sizes Δ_t matched to a variance schedule, one per timestep."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=np.float64)
        if d.ndim != 1 or not np.all(d > 0.0) or not np.all(np.diff(d) > 0.0):
            raise ValueError("deltas must be positive and strictly increasing")
        d.flags.writeable = False
        object.__setattr__(self, "deltas", d)

    @classmethod
    def from_variance(cls, vs: VarianceSchedule) -> "QuantizationSchedule":
        return cls(deltas=delta_for_alpha(vs.alphas))

    def delta(self, t: int) -> float:
        if not 0 <= t < self.deltas.size:
            raise IndexError(f"t={t} outside [0, {self.deltas.size - 1}]")
        return float(self.deltas[t])


def _clip_alpha(a: np.ndarray) -> np.ndarray:
    return np.clip(a, ALPHA_MIN, ALPHA_MAX)


def make_linear_schedule(n_steps: int, beta_min: float, beta_max: float) -> VarianceSchedule:
    """Schedule with per-step noise rates β linearly spaced over n_steps.

    ᾱ_t = Π_{s≤t} (1 − β_s), with ᾱ_0 = 1 before clipping.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError("need 0 < beta_min <= beta_max < 1")
    betas = np.linspace(beta_min, beta_max, n_steps)
    alphas = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return VarianceSchedule(alphas=_clip_alpha(alphas))


def make_cosine_schedule(n_steps: int) -> VarianceSchedule:
    """Squared-cosine profile ᾱ_t = cos(π/2 · t/n_steps)², clipped at both ends."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    t = np.arange(n_steps + 1, dtype=np.float64)
    alphas = np.cos(0.5 * np.pi * t / n_steps) ** 2
    return VarianceSchedule(alphas=_clip_alpha(alphas))


def delta_for_alpha(alpha_bar):
    """Step size Δ = √(12 · (1 − ᾱ)) whose uniform error variance is 1 − ᾱ."""
    a = np.asarray(alpha_bar, dtype=np.float64)
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError("alpha_bar must lie in [0, 1]")
    out = np.sqrt(12.0 * (1.0 - a))
    return float(out) if np.isscalar(alpha_bar) else out


def delta_at(vs: VarianceSchedule, t: int) -> float:
    """Δ_t for one timestep of a schedule."""
    return delta_for_alpha(vs.alpha_at(t))


def snr_for_alpha(alpha_bar: float, signal_power: float) -> float:
    """Signal-to-noise ratio ᾱ·P / (1−ᾱ); math.inf at ᾱ = 1 (noiseless)."""
    if not 0.0 <= alpha_bar <= 1.0:
        raise ValueError("alpha_bar must lie in [0, 1]")
    if signal_power < 0.0:
        raise ValueError("signal_power must be >= 0")
    if alpha_bar == 1.0:
        return math.inf
    return alpha_bar * signal_power / (1.0 - alpha_bar)


def snr_theoretical(vs: VarianceSchedule, t: int, signal_power: float) -> float:
    """SNR of y_t (equivalently of the dithered-quantizer output) at step t."""
    return snr_for_alpha(vs.alpha_at(t), signal_power)


def serialize_schedule(vs: VarianceSchedule) -> str:
    """Canonical text form: first line n_steps, then one ᾱ value per line.

    Floats are written with repr, so parsing the text reproduces the array
    bit-exactly.
    """
    lines = [str(vs.n_steps)]
    lines.extend(repr(float(a)) for a in vs.alphas)
    return "\n".join(lines) + "\n"


def deserialize_schedule(text: str) -> VarianceSchedule:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty schedule text")
    try:
        n_steps = int(lines[0])
    except ValueError as e:
        raise ValueError(f"bad n_steps line: {lines[0]!r}") from e
    values = lines[1:]
    if len(values) != n_steps + 1:
        raise ValueError(f"expected {n_steps + 1} alpha_bar values, got {len(values)}")
    alphas = np.array([float(v) for v in values], dtype=np.float64)
    return VarianceSchedule(alphas=alphas)


def save_schedule(vs: VarianceSchedule, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(serialize_schedule(vs))


def load_schedule(path) -> VarianceSchedule:
    with open(path, "r", encoding="ascii") as f:
        return deserialize_schedule(f.read())


def schedule_digest(vs: VarianceSchedule) -> bytes:
    """8-byte digest of the canonical serialization, used to pair containers
    with the schedule they were encoded under."""
    return hashlib.sha256(serialize_schedule(vs).encode("ascii")).digest()[:8]


def parse_schedule_spec(spec: str) -> VarianceSchedule:
    """Build a schedule from a command-line spec string.

    Accepted forms:

    * ``linear`` (1000 steps, β from 1e-4 to 0.02) or ``linear:<n>,<bmin>,<bmax>``
    * ``cosine`` (50 steps) or ``cosine:<n>``
    * ``file:<path>`` for the text format of :func:`save_schedule`
    """
    if spec == "linear":
        return make_linear_schedule(1000, 1e-4, 0.02)
    if spec == "cosine":
        return make_cosine_schedule(50)
    if spec.startswith("linear:"):
        parts = spec[len("linear:"):].split(",")
        if len(parts) != 3:
            raise ValueError("linear:<n>,<beta_min>,<beta_max>")
        return make_linear_schedule(int(parts[0]), float(parts[1]), float(parts[2]))
    if spec.startswith("cosine:"):
        return make_cosine_schedule(int(spec[len("cosine:"):]))
    if spec.startswith("file:"):
        return load_schedule(spec[len("file:"):])
    raise ValueError(f"unknown schedule spec {spec!r}")
