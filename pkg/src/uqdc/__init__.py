"""Desk-scale verifiable codec built on dithered quantization.

The forward "noising" step of a diffusion process is replaced by universal
quantization at a matched step size, the symbols are entropy coded, and a
deterministic DDIM sampler with closed-form posterior-mean denoisers runs the
reverse process. Because every stage is analytic, the three mismatches that
matter to such a codec (noise type, noise level, discretization) can be
measured exactly; see uqdc.harness.
"""

from .codec import (
    BlockCosineTransform,
    build_transform,
    Container,
    ContainerError,
    IdentityTransform,
    compress,
    decompress,
    parse_container,
    pgm_to_unit,
    rate_of,
    read_pgm,
    serialize_container,
    unit_to_pgm,
    write_pgm,
)
from .diffusion import (
    Denoiser,
    EpsEstimate,
    GmmSource,
    ddim_sample,
    ddim_step,
    full_step_path,
    gmm_gaussian_denoiser,
    gmm_uniform_aware_denoiser,
    oracle_denoiser,
    sampling_alpha,
    spaced_step_path,
)
from .entropy import (
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
from .harness import (
    DEMO_GMM,
    GapReport,
    RdPoint,
    ablate_discretization,
    ablate_noise_level,
    ablate_noise_type,
    psnr_db,
    rd_points_to_csv,
    rd_sweep,
    sample_source,
    snr_empirical,
    source_sampler,
    verify_discretization,
    verify_noise_level,
    verify_noise_type,
    verify_rd,
)
from .quantizer import (
    AlphabetOverflowError,
    DitherField,
    QuantizedLatent,
    dequantize,
    forward_quantize,
    forward_quantize_with_dither,
    hard_dequantize,
    hard_quantize,
    sample_dither,
)
from .schedule import (
    QuantizationSchedule,
    VarianceSchedule,
    delta_at,
    delta_for_alpha,
    deserialize_schedule,
    load_schedule,
    make_cosine_schedule,
    make_linear_schedule,
    parse_schedule_spec,
    save_schedule,
    schedule_digest,
    serialize_schedule,
    snr_for_alpha,
    snr_theoretical,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
