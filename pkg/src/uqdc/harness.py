"""Reproducible rate-distortion sweeps and mismatch-gap experiments.

Every experiment is a deterministic function of its arguments plus one root
seed: per-condition generators and dither seeds are derived from
numpy.random.SeedSequence, and aggregation uses numpy's pairwise summation,
so repeated runs produce identical CSV bytes.

The three gap experiments quantify what a codec loses when its denoiser is
wrong about the quantizer:

* noise level: quantize at t_s, reconstruct assuming t_r (grid over both);
* noise type: same dithered data through the uniform-aware posterior mean
  versus the Gaussian-noise posterior mean;
* discretization: dithered versus hard quantization feeding the same
  uniform-aware denoiser.

Reconstruction in the gap experiments is the denoiser's single-step posterior
mean (clean_hat at the assumed timestep), the setting in which the expected
orderings are provable; rd_sweep exercises the full multi-step codec path.
MSE comparisons between two estimators on shared samples also report the
paired standard error of the difference, so callers can tell a real gap from
Monte-Carlo noise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import codec
from .diffusion import (
    Denoiser,
    GmmSource,
    ddim_sample,
    full_step_path,
    gmm_gaussian_denoiser,
    gmm_uniform_aware_denoiser,
)
from .entropy import decode
from .quantizer import (
    QuantizedLatent,
    dequantize,
    forward_quantize,
    hard_dequantize,
    hard_quantize,
)
from .schedule import QuantizationSchedule, VarianceSchedule

DEFAULT_TRIALS = 256
DEFAULT_SAMPLES = 4096

# Asymmetric three-component mixture used by the demos and acceptance run.
# Components overlap into a smooth skewed density: a density with deep valleys
# would let a fixed quantizer lattice land its bin edges on them at some step
# sizes and beat dithering, which is exactly the alignment luck the
# discretization experiment must not reward.
DEMO_GMM = GmmSource(
    weights=np.array([0.5, 0.3, 0.2]),
    means=np.array([-0.35, 0.25, 0.9]),
    stds=np.array([0.6, 0.45, 0.8]),
)


def snr_empirical(signal: np.ndarray, noisy: np.ndarray) -> float:
    """Power ratio sum(signal^2) / sum((noisy - signal)^2)."""
    signal = np.asarray(signal, dtype=np.float64)
    noise = np.asarray(noisy, dtype=np.float64) - signal
    denom = float(np.sum(noise**2))
    if denom == 0.0:
        return float("inf")
    return float(np.sum(signal**2)) / denom


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


@dataclass(frozen=True)
class GapReport:
    """Tabular experiment result: named columns, one row per condition."""

    kind: str
    columns: tuple
    rows: tuple

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


@dataclass(frozen=True)
class RdPoint:
    t: int
    bits_per_sample: float
    header_bits_per_sample: float
    mse: float
    psnr: float  # dB against the [-1, 1] image range: 10*log10(4/mse)


def psnr_db(mse: float) -> float:
    """PSNR in dB for signals on the [-1, 1] image scale (peak-to-peak 2)."""
    if mse <= 0.0:
        return math.inf
    return 10.0 * math.log10(4.0 / mse)


def rd_points_to_csv(points) -> str:
    lines = ["t,bits_per_sample,header_bits_per_sample,mse,psnr"]
    for p in points:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (p.t, p.bits_per_sample, p.header_bits_per_sample, p.mse, p.psnr)
            )
        )
    return "\n".join(lines) + "\n"


_SOURCE_RE = re.compile(r"^(gaussian|laplace)\(([^)]*)\)$")


def sample_source(spec: str, n: int, seed: int) -> np.ndarray:
    """Draw n samples from a source spec string, deterministically in (spec, n, seed).

    Specs: ``gaussian(mean,std)``, ``laplace(scale)``, ``gmm:<json path>``,
    ``pgm:<image path>`` (pixels mapped to [-1, 1], cycled to length n).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA5]))
    m = _SOURCE_RE.match(spec)
    if m:
        args = [float(v) for v in m.group(2).split(",")]
        if m.group(1) == "gaussian":
            if len(args) != 2 or args[1] <= 0:
                raise ValueError("gaussian(mean,std) needs std > 0")
            return rng.normal(args[0], args[1], n)
        if len(args) != 1 or args[0] <= 0:
            raise ValueError("laplace(scale) needs scale > 0")
        return rng.laplace(0.0, args[0], n)
    if spec.startswith("gmm:"):
        with open(spec[4:], "r", encoding="ascii") as f:
            return GmmSource.from_json(f.read()).sample(n, rng)
    if spec.startswith("pgm:"):
        flat = codec.pgm_to_unit(codec.read_pgm(spec[4:])).reshape(-1)
        reps = -(-n // flat.size)
        return np.tile(flat, reps)[:n]
    raise ValueError(f"unknown source spec {spec!r}")


def source_sampler(source):
    """Normalize a source argument (GmmSource, spec string, or callable) to a
    callable (n, rng) -> samples."""
    if isinstance(source, GmmSource):
        return source.sample
    if isinstance(source, str):
        return lambda n, rng: sample_source(source, n, int(rng.integers(2**63)))
    if callable(source):
        return source
    raise TypeError("source must be a GmmSource, spec string, or callable")


def _condition_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def _paired_gap_se(err_sq_a: np.ndarray, err_sq_b: np.ndarray) -> float:
    """Standard error of mean(err_sq_a - err_sq_b) on shared samples."""
    d = err_sq_a - err_sq_b
    return float(d.std(ddof=1) / np.sqrt(d.size))


def rd_sweep(
    source,
    vs: VarianceSchedule,
    t_list,
    denoiser: Denoiser,
    trials: int = DEFAULT_TRIALS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> list:
    """Rate and distortion of the full codec path at each timestep.

    Each trial compresses `samples` fresh source draws through the real
    container path and records exact payload/header bits. Reconstruction MSE
    runs the same decode + reverse-sampler math with trials batched into one
    tensor (bitwise-identical math to decompress, far fewer Python calls).
    """
    sampler = source_sampler(source)
    tr = codec.IdentityTransform()
    points = []
    for t in t_list:
        rng = _condition_rng(seed, 1, t)
        payload_bits = np.empty(trials, dtype=np.float64)
        header_bits = np.empty(trials, dtype=np.float64)
        clean = np.empty((trials, samples), dtype=np.float64)
        noisy = np.empty((trials, samples), dtype=np.float64)
        for i in range(trials):
            y0 = sampler(samples, rng)
            c = codec.compress(y0, t, vs, tr, seed=int(rng.integers(2**63)))
            pb, hb = codec.rate_of(c)
            payload_bits[i] = pb
            header_bits[i] = hb
            symbols = decode(c.payload, c.model, c.shape)
            q = QuantizedLatent(symbols=symbols, t=t, seed=c.seed, shape=c.shape)
            clean[i] = y0
            noisy[i] = dequantize(q, vs)[0]
        y0_hat = ddim_sample(noisy.reshape(-1), t, full_step_path(t), denoiser, vs)
        mse = float(np.mean((y0_hat - clean.reshape(-1)) ** 2))
        points.append(
            RdPoint(
                t=int(t),
                bits_per_sample=float(payload_bits.mean() / samples),
                header_bits_per_sample=float(header_bits.mean() / samples),
                mse=mse,
                psnr=psnr_db(mse),
            )
        )
    return points


def ablate_noise_level(
    src: GmmSource,
    vs: VarianceSchedule,
    ts_list,
    tr_list,
    trials: int = DEFAULT_TRIALS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    assume: str = "gaussian",
) -> GapReport:
    """Quantize at t_s, reconstruct with the posterior mean assumed at t_r.

    One dithered tensor per row is shared across every t_r (common random
    numbers), so within-row comparisons are paired.
    """
    if assume == "gaussian":
        den = gmm_gaussian_denoiser(src)
    elif assume == "uniform":
        den = gmm_uniform_aware_denoiser(src, QuantizationSchedule.from_variance(vs))
    else:
        raise ValueError("assume must be 'gaussian' or 'uniform'")
    n = trials * samples
    rows = []
    for t_s in ts_list:
        rng = _condition_rng(seed, 2, t_s)
        y0 = src.sample(n, rng)
        q = forward_quantize(y0, vs, int(t_s), seed=int(rng.integers(2**63)))
        y_hat = dequantize(q, vs)
        mses = {}
        for t_r in tr_list:
            clean = den.predict_eps(y_hat, int(t_r), vs).clean_hat
            mses[t_r] = float(np.mean((clean - y0) ** 2))
        best = min(mses, key=mses.get)
        for t_r in tr_list:
            rows.append(
                (int(t_s), int(t_r), mses[t_r], int(t_r == t_s), int(t_r == best))
            )
    return GapReport(
        kind="noise-level",
        columns=("t_send", "t_assumed", "mse", "is_diagonal", "is_row_minimum"),
        rows=tuple(rows),
    )


def ablate_noise_type(
    src: GmmSource,
    vs: VarianceSchedule,
    t_list,
    trials: int = DEFAULT_TRIALS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> GapReport:
    """Uniform-aware versus Gaussian-assumption posterior mean on the same
    dithered data. gap = mse_gaussian - mse_uniform (positive favors the
    noise-matched denoiser); gap_se is the paired standard error."""
    qs = QuantizationSchedule.from_variance(vs)
    den_u = gmm_uniform_aware_denoiser(src, qs)
    den_g = gmm_gaussian_denoiser(src)
    n = trials * samples
    rows = []
    for t in t_list:
        rng = _condition_rng(seed, 3, t)
        y0 = src.sample(n, rng)
        q = forward_quantize(y0, vs, int(t), seed=int(rng.integers(2**63)))
        y_hat = dequantize(q, vs)
        e_u = (den_u.predict_eps(y_hat, int(t), vs).clean_hat - y0) ** 2
        e_g = (den_g.predict_eps(y_hat, int(t), vs).clean_hat - y0) ** 2
        mse_u = float(e_u.mean())
        mse_g = float(e_g.mean())
        rows.append(
            (
                int(t),
                mse_u,
                mse_g,
                mse_g - mse_u,
                _paired_gap_se(e_g, e_u),
                "uniform" if mse_u <= mse_g else "gaussian",
            )
        )
    return GapReport(
        kind="noise-type",
        columns=("t", "mse_uniform_aware", "mse_gaussian", "gap", "gap_se", "winner"),
        rows=tuple(rows),
    )


def ablate_discretization(
    src: GmmSource,
    vs: VarianceSchedule,
    t_list,
    trials: int = DEFAULT_TRIALS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> GapReport:
    """Dithered versus hard quantization feeding the same uniform-aware
    denoiser. gap = mse_hard - mse_universal; gap_se is the paired standard
    error on shared clean samples."""
    qs = QuantizationSchedule.from_variance(vs)
    den = gmm_uniform_aware_denoiser(src, qs)
    n = trials * samples
    rows = []
    for t in t_list:
        rng = _condition_rng(seed, 4, t)
        y0 = src.sample(n, rng)
        q_u = forward_quantize(y0, vs, int(t), seed=int(rng.integers(2**63)))
        y_u = dequantize(q_u, vs)
        y_h = hard_dequantize(hard_quantize(y0, vs, int(t)), vs)
        e_u = (den.predict_eps(y_u, int(t), vs).clean_hat - y0) ** 2
        e_h = (den.predict_eps(y_h, int(t), vs).clean_hat - y0) ** 2
        mse_u = float(e_u.mean())
        mse_h = float(e_h.mean())
        rows.append(
            (
                int(t),
                mse_u,
                mse_h,
                mse_h - mse_u,
                _paired_gap_se(e_h, e_u),
                "universal" if mse_u <= mse_h else "hard",
            )
        )
    return GapReport(
        kind="discretization",
        columns=("t", "mse_universal", "mse_hard", "gap", "gap_se", "winner"),
        rows=tuple(rows),
    )


def verify_rd(points) -> list:
    """Monotonicity self-check: rate strictly falls, MSE strictly rises with t."""
    problems = []
    for a, b in zip(points, points[1:]):
        if not b.bits_per_sample < a.bits_per_sample:
            problems.append(f"rate not strictly decreasing between t={a.t} and t={b.t}")
        if not b.mse > a.mse:
            problems.append(f"mse not strictly increasing between t={a.t} and t={b.t}")
    return problems


def verify_noise_level(report: GapReport) -> list:
    problems = []
    for t_s, t_r, _, diag, best in report.rows:
        if diag and not best:
            problems.append(f"row t_send={t_s}: minimum not on the diagonal")
    return problems


def _verify_gap_rows(report: GapReport, favored: str) -> list:
    problems = []
    cols = report.columns
    for row in report.rows:
        r = dict(zip(cols, row))
        if r["gap"] < -3.0 * r["gap_se"]:
            problems.append(
                f"t={r['t']}: {favored} loses beyond 3 standard errors (gap={r['gap']:.3g})"
            )
    return problems


def verify_noise_type(report: GapReport) -> list:
    return _verify_gap_rows(report, "uniform-aware denoiser")


def verify_discretization(report: GapReport) -> list:
    return _verify_gap_rows(report, "universal quantization")
