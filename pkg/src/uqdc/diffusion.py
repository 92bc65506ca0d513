"""Analytic denoisers and deterministic DDIM sampling.

A denoiser consumes a noisy tensor y_t and predicts the noise it carries:

    predict_eps(y_t, t, vs) -> EpsEstimate(eps_hat, clean_hat)

with the two fields tied by the forward-process identity

    clean_hat = (y_t − √(1−ᾱ_t) · eps_hat) / √ᾱ_t.

The deterministic reverse update between two timesteps is

    y_{t_prev} = √ᾱ_{t_prev} · clean_hat + √(1−ᾱ_{t_prev}) · eps_hat,

where the sampler treats t_prev = 0 as exactly clean (ᾱ = 1), so a final step
to 0 returns clean_hat with no residual noise injection; schedules themselves
store clipped ᾱ to keep the quantization path finite.

The denoisers here are closed-form posterior means under a diagonal Gaussian
mixture prior on clean data: one assumes Gaussian noise of variance 1−ᾱ_t,
the other knows the noise is the uniform error of a dithered quantizer, which
truncates the prior to the interval the quantizer output pins down. All the
truncated-moment arithmetic runs in log space so far-tail intervals do not
cancel away.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.special import log_ndtr, ndtr

from .schedule import QuantizationSchedule, VarianceSchedule

logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_MASS_UNDERFLOW_LOG = math.log(1e-300)

_diagnostics = {"uniform_fallback_elements": 0}


def diagnostics_snapshot() -> dict:
    """Counters of numerical fallback events since the last reset."""
    return dict(_diagnostics)


def diagnostics_reset() -> None:
    for k in _diagnostics:
        _diagnostics[k] = 0


@dataclass(frozen=True)
class GmmSource:
    """Diagonal Gaussian-mixture prior over clean data, i.i.d. per element."""

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.stds, dtype=np.float64)
        if not (w.ndim == m.ndim == s.ndim == 1) or not (w.size == m.size == s.size >= 1):
            raise ValueError("weights, means, stds must be 1-D with equal length >= 1")
        if np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(s <= 0.0):
            raise ValueError("stds must be positive")
        for arr in (w, m, s):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def variance(self) -> float:
        second = np.dot(self.weights, self.stds**2 + self.means**2)
        return float(second - self.mean**2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        return rng.normal(self.means[comp], self.stds[comp])

    @classmethod
    def single(cls, mean: float, std: float) -> "GmmSource":
        return cls(weights=np.array([1.0]), means=np.array([mean]), stds=np.array([std]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": self.weights.tolist(),
                "means": self.means.tolist(),
                "stds": self.stds.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GmmSource":
        obj = json.loads(text)
        return cls(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            means=np.asarray(obj["means"], dtype=np.float64),
            stds=np.asarray(obj["stds"], dtype=np.float64),
        )


@dataclass(frozen=True)
class EpsEstimate:
    """Noise prediction plus the clean estimate it implies."""

    eps_hat: np.ndarray
    clean_hat: np.ndarray


def _estimate_from_clean(y_t: np.ndarray, alpha: float, clean_hat: np.ndarray) -> EpsEstimate:
    eps_hat = (y_t - math.sqrt(alpha) * clean_hat) / math.sqrt(1.0 - alpha)
    return EpsEstimate(eps_hat=eps_hat, clean_hat=clean_hat)


def _estimate_from_eps(y_t: np.ndarray, alpha: float, eps_hat: np.ndarray) -> EpsEstimate:
    clean_hat = (y_t - math.sqrt(1.0 - alpha) * eps_hat) / math.sqrt(alpha)
    return EpsEstimate(eps_hat=eps_hat, clean_hat=clean_hat)


class Denoiser(Protocol):
    def predict_eps(
        self, y_t: np.ndarray, t: int, vs: VarianceSchedule
    ) -> EpsEstimate: ...


class _OracleDenoiser:
    """Returns the exact noise that built y_t; inverts the forward process."""

    def __init__(self, true_eps: np.ndarray):
        self._eps = np.asarray(true_eps, dtype=np.float64)

    def predict_eps(self, y_t, t, vs):
        y_t = np.asarray(y_t, dtype=np.float64)
        if y_t.shape != self._eps.shape:
            raise ValueError("y_t shape disagrees with the stored noise")
        return _estimate_from_eps(y_t, vs.alpha_at(t), self._eps)


def oracle_denoiser(true_eps: np.ndarray) -> _OracleDenoiser:
    return _OracleDenoiser(true_eps)


def _log_softmax_weights(logw: np.ndarray) -> np.ndarray:
    # logw: (K, n). Rows that are all -inf stay NaN and are patched by callers.
    top = np.max(logw, axis=0, keepdims=True)
    with np.errstate(invalid="ignore"):
        shifted = np.where(np.isfinite(top), logw - top, -np.inf)
        w = np.exp(shifted)
        return w / np.sum(w, axis=0, keepdims=True)


class _GmmGaussianDenoiser:
    """Posterior mean of the mixture prior under Gaussian noise of variance 1−ᾱ_t."""

    def __init__(self, src: GmmSource):
        self._src = src

    def predict_eps(self, y_t, t, vs):
        src = self._src
        alpha = vs.alpha_at(t)
        y = np.asarray(y_t, dtype=np.float64)
        flat = y.reshape(-1)[None, :]
        m = src.means[:, None]
        var = alpha * src.stds[:, None] ** 2 + (1.0 - alpha)
        resid = flat - math.sqrt(alpha) * m
        logw = (
            np.log(src.weights)[:, None]
            - 0.5 * np.log(var)
            - 0.5 * resid**2 / var
        )
        resp = _log_softmax_weights(logw)
        comp_mean = (m * (1.0 - alpha) + math.sqrt(alpha) * src.stds[:, None] ** 2 * flat) / var
        clean = np.sum(resp * comp_mean, axis=0).reshape(y.shape)
        return _estimate_from_clean(y, alpha, clean)


def gmm_gaussian_denoiser(src: GmmSource) -> _GmmGaussianDenoiser:
    return _GmmGaussianDenoiser(src)


def _log_phi(x: np.ndarray) -> np.ndarray:
    return -0.5 * x * x - _LOG_SQRT_2PI


def _log_gauss_mass(lo: np.ndarray, hi: np.ndarray):
    """log(Φ(hi) − Φ(lo)) elementwise, stable in both tails. Returns −inf where
    the mass underflows entirely."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    out = np.empty(lo.shape, dtype=np.float64)

    with np.errstate(divide="ignore", invalid="ignore"):
        right = lo >= 0.0  # both bounds in the right tail
        la = log_ndtr(-lo[right])
        lb = log_ndtr(-hi[right])
        out[right] = la + np.log1p(-np.exp(np.minimum(lb - la, 0.0)))

        left = hi <= 0.0  # both bounds in the left tail
        la = log_ndtr(lo[left])
        lb = log_ndtr(hi[left])
        out[left] = lb + np.log1p(-np.exp(np.minimum(la - lb, 0.0)))

        mid = ~(right | left)  # interval straddles 0: plain difference is exact
        out[mid] = np.log(ndtr(hi[mid]) - ndtr(lo[mid]))
    return out


def _truncnorm_standard_mean(lo: np.ndarray, hi: np.ndarray, log_mass: np.ndarray):
    """Mean of a standard normal truncated to [lo, hi]: (φ(lo) − φ(hi)) / mass."""
    alo = np.abs(lo)
    ahi = np.abs(hi)
    near = np.minimum(alo, ahi)
    far = np.maximum(alo, ahi)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_diff = _log_phi(near) + np.log1p(-np.exp(_log_phi(far) - _log_phi(near)))
        ratio = np.exp(log_diff - log_mass)
    sign = np.sign(ahi - alo)
    mean = np.where(np.isfinite(ratio), sign * ratio, 0.0)
    # An interval entirely in one tail can round its ratio past the endpoint.
    return np.clip(mean, lo, hi)


class _GmmUniformAwareDenoiser:
    """Posterior mean of the mixture prior given the dithered-quantizer output.

    The quantizer guarantees |y_t − √ᾱ_t·y_0| ≤ Δ_t/2, so conditioning on y_t
    truncates each mixture component to an interval in clean space. Elements
    whose total truncated mass underflows (below 1e-300) fall back to the
    interval endpoint nearest the prior mean; the event is counted in the
    module diagnostics and logged.
    """

    def __init__(self, src: GmmSource, qs: QuantizationSchedule):
        self._src = src
        self._qs = qs

    def predict_eps(self, y_t, t, vs):
        src = self._src
        alpha = vs.alpha_at(t)
        delta = self._qs.delta(t)
        root = math.sqrt(alpha)
        y = np.asarray(y_t, dtype=np.float64)
        flat = y.reshape(-1)[None, :]

        a = (flat - 0.5 * delta) / root
        b = (flat + 0.5 * delta) / root
        m = src.means[:, None]
        s = src.stds[:, None]
        lo = (a - m) / s
        hi = (b - m) / s

        log_mass = _log_gauss_mass(lo, hi)
        comp_mean = m + s * _truncnorm_standard_mean(lo, hi, log_mass)
        comp_mean = np.where(np.isfinite(log_mass), comp_mean, np.clip(m, a, b))

        logw = np.log(src.weights)[:, None] + log_mass
        total = np.max(logw, axis=0)
        dead = total < _MASS_UNDERFLOW_LOG
        resp = _log_softmax_weights(logw)
        clean = np.sum(np.where(np.isfinite(resp), resp, 0.0) * comp_mean, axis=0)

        if np.any(dead):
            count = int(dead.sum())
            _diagnostics["uniform_fallback_elements"] += count
            logger.debug(
                "uniform-aware denoiser: %d element(s) fell back to interval endpoints",
                count,
            )
            prior = src.mean
            clean = np.where(dead, np.clip(prior, a[0], b[0]), clean)

        return _estimate_from_clean(y, alpha, clean.reshape(y.shape))


def gmm_uniform_aware_denoiser(
    src: GmmSource, qs: QuantizationSchedule
) -> _GmmUniformAwareDenoiser:
    return _GmmUniformAwareDenoiser(src, qs)


def sampling_alpha(vs: VarianceSchedule, t: int) -> float:
    """ᾱ as the reverse sampler sees it: exactly 1 at the clean endpoint t=0."""
    return 1.0 if t == 0 else vs.alpha_at(t)


def ddim_update(clean_hat: np.ndarray, eps_hat: np.ndarray, alpha_prev: float) -> np.ndarray:
    """Deterministic reverse update given a target ᾱ."""
    return math.sqrt(alpha_prev) * clean_hat + math.sqrt(1.0 - alpha_prev) * eps_hat


def ddim_step(
    y_t: np.ndarray, t: int, t_prev: int, d: Denoiser, vs: VarianceSchedule
) -> np.ndarray:
    """One reverse step t -> t_prev (t_prev < t)."""
    if not 0 <= t_prev < t <= vs.n_steps:
        raise ValueError(f"need 0 <= t_prev < t <= {vs.n_steps}, got {t_prev}, {t}")
    est = d.predict_eps(y_t, t, vs)
    return ddim_update(est.clean_hat, est.eps_hat, sampling_alpha(vs, t_prev))


def ddim_sample(
    y_t: np.ndarray, t_start: int, steps, d: Denoiser, vs: VarianceSchedule
) -> np.ndarray:
    """Fold ddim_step along a strictly descending step list ending at 0.

    steps[0] must equal t_start; a single-element path [0] returns the input
    unchanged.
    """
    steps = list(steps)
    if not steps or steps[0] != t_start:
        raise ValueError("steps must start at t_start")
    if steps[-1] != 0:
        raise ValueError("steps must end at 0")
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be strictly descending")
    y = np.asarray(y_t, dtype=np.float64)
    for t_cur, t_next in zip(steps, steps[1:]):
        y = ddim_step(y, t_cur, t_next, d, vs)
    return y


def full_step_path(t_start: int) -> list:
    """The default reverse path t, t-1, ..., 1, 0."""
    return list(range(t_start, -1, -1))


def spaced_step_path(t_start: int, n_steps: int) -> list:
    """Reverse path of at most n_steps uniformly spaced steps from t_start to 0.

    The lead point is kept at t_start and the remaining points are rounded
    from an even spacing down to 0; duplicates collapse, so asking for more
    steps than t_start yields the full path.
    """
    if t_start < 1:
        raise ValueError("t_start must be >= 1")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    grid = np.round(np.linspace(t_start, 0.0, n_steps + 1)).astype(int)
    path = [int(grid[0])]
    for v in grid[1:]:
        if int(v) < path[-1]:
            path.append(int(v))
    return path
