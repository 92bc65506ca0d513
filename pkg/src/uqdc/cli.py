"""Command-line front end for compression round-trips and experiments.

Conventions: data (CSV tables, schedule text) goes to the path named by
--csv/--out, or to stdout when the path is omitted or "-"; status lines go to
stderr so piped output stays machine-readable. Exit codes: 0 success, 1
operational error or --verify violation, 2 usage error (argparse).

Seeds accept any Python integer literal, so hex like 0xC0FFEE works.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .codec import (
    BlockCosineTransform,
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
    GmmSource,
    full_step_path,
    gmm_gaussian_denoiser,
    gmm_uniform_aware_denoiser,
    spaced_step_path,
)
from .entropy import DecodeError
from .harness import (
    DEFAULT_SAMPLES,
    DEFAULT_TRIALS,
    DEMO_GMM,
    GapReport,
    ablate_discretization,
    ablate_noise_level,
    ablate_noise_type,
    rd_points_to_csv,
    rd_sweep,
    sample_source,
    verify_discretization,
    verify_noise_level,
    verify_noise_type,
    verify_rd,
)
from .schedule import (
    QuantizationSchedule,
    parse_schedule_spec,
    schedule_digest,
    serialize_schedule,
    snr_theoretical,
)

_T_GRID_DEFAULT = "1,2,5,10,20,30,40"


def _status(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii") as f:
            f.write(text)


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit int")
    return seed


def _t_grid(value: str) -> list:
    try:
        grid = [int(v) for v in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be comma-separated integers")
    if not grid or any(t < 1 for t in grid) or any(
        b <= a for a, b in zip(grid, grid[1:])
    ):
        raise argparse.ArgumentTypeError("grid must be strictly increasing and >= 1")
    return grid


def _denoiser(spec: str, vs):
    """gaussian | uniform | gmm:<json path>; the prior defaults to a unit
    normal, and gmm priors use the uniform-aware posterior (the noise the
    quantizer actually produces)."""
    if spec == "gaussian":
        return gmm_gaussian_denoiser(GmmSource.single(0.0, 1.0))
    if spec == "uniform":
        return gmm_uniform_aware_denoiser(
            GmmSource.single(0.0, 1.0), QuantizationSchedule.from_variance(vs)
        )
    if spec.startswith("gmm:"):
        with open(spec[4:], "r", encoding="ascii") as f:
            src = GmmSource.from_json(f.read())
        return gmm_uniform_aware_denoiser(src, QuantizationSchedule.from_variance(vs))
    raise ValueError(f"unknown denoiser {spec!r}")


def _gmm_source(spec) -> GmmSource:
    if spec is None:
        return DEMO_GMM
    if spec.startswith("gmm:"):
        with open(spec[4:], "r", encoding="ascii") as f:
            return GmmSource.from_json(f.read())
    if spec.startswith("gaussian(") and spec.endswith(")"):
        mean, std = (float(v) for v in spec[9:-1].split(","))
        return GmmSource.single(mean, std)
    raise ValueError(f"experiments need an analytic source, got {spec!r}")


def _verify_exit(problems: list) -> int:
    for p in problems:
        _status(f"verify: {p}")
    if problems:
        _status(f"verify: {len(problems)} violation(s)")
        return 1
    _status("verify: all invariants hold")
    return 0


def _cmd_compress(args) -> int:
    vs = parse_schedule_spec(args.schedule)
    if args.infile.startswith("pgm:") or args.infile.endswith(".pgm"):
        path = args.infile[4:] if args.infile.startswith("pgm:") else args.infile
        x = pgm_to_unit(read_pgm(path))
        tr = BlockCosineTransform(args.block)
    else:
        x = sample_source(args.infile, args.samples, args.seed)
        tr = IdentityTransform()
    c = compress(x, args.t, vs, tr, seed=args.seed)
    blob = serialize_container(c)
    with open(args.out, "wb") as f:
        f.write(blob)
    pb, hb = rate_of(c)
    _status(
        f"wrote {args.out}: {len(blob)} bytes, {pb / x.size:.3f} payload + "
        f"{hb / x.size:.3f} header bits/sample at t={args.t}"
    )
    return 0


def _cmd_decompress(args) -> int:
    vs = parse_schedule_spec(args.schedule)
    with open(args.infile, "rb") as f:
        c = parse_container(f.read())
    den = _denoiser(args.denoiser, vs)
    steps = None if args.steps is None else spaced_step_path(c.t, args.steps)
    out = decompress(c, den, vs, steps=steps)
    if args.out.endswith(".npy"):
        np.save(args.out, out)
    elif out.ndim == 2:
        write_pgm(args.out, unit_to_pgm(out))
    else:
        raise ValueError("1-D reconstructions need an .npy output path")
    n_steps = len(steps or full_step_path(c.t)) - 1
    _status(f"wrote {args.out}: shape {out.shape}, {n_steps} reverse steps from t={c.t}")
    return 0


def _cmd_rd_sweep(args) -> int:
    vs = parse_schedule_spec(args.schedule)
    points = rd_sweep(
        args.source,
        vs,
        args.t_grid,
        _denoiser(args.denoiser, vs),
        trials=args.trials,
        samples=args.samples,
        seed=args.seed,
    )
    _write_text(args.csv, rd_points_to_csv(points))
    if args.verify:
        return _verify_exit(verify_rd(points))
    return 0


def _cmd_ablate(args) -> int:
    vs = parse_schedule_spec(args.schedule)
    src = _gmm_source(args.source)
    if args.experiment == "noise-level":
        report = ablate_noise_level(
            src, vs, args.t_grid, args.t_grid,
            trials=args.trials, samples=args.samples, seed=args.seed,
            assume=args.assume,
        )
        problems = verify_noise_level(report)
    elif args.experiment == "noise-type":
        report = ablate_noise_type(
            src, vs, args.t_grid,
            trials=args.trials, samples=args.samples, seed=args.seed,
        )
        problems = verify_noise_type(report)
    else:
        report = ablate_discretization(
            src, vs, args.t_grid,
            trials=args.trials, samples=args.samples, seed=args.seed,
        )
        problems = verify_discretization(report)
    _write_text(args.csv, report.to_csv())
    if args.verify:
        return _verify_exit(problems)
    return 0


def _cmd_schedule_dump(args) -> int:
    vs = parse_schedule_spec(args.schedule)
    if args.csv is not None:
        qs = QuantizationSchedule.from_variance(vs)
        rows = tuple(
            (t, vs.alpha_at(t), qs.delta(t), snr_theoretical(vs, t, 1.0))
            for t in range(vs.n_steps + 1)
        )
        table = GapReport(kind="schedule", columns=("t", "alpha_bar", "delta", "snr"), rows=rows)
        _write_text(args.csv, table.to_csv())
    else:
        _write_text(args.out, serialize_schedule(vs))
    _status(f"schedule {args.schedule}: {vs.n_steps} steps, digest {schedule_digest(vs).hex()}")
    return 0


def _cmd_source_sample(args) -> int:
    values = sample_source(args.source, args.n, args.seed)
    table = GapReport(kind="source", columns=("value",), rows=tuple((float(v),) for v in values))
    _write_text(args.csv, table.to_csv())
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="uqdc",
        description="Dithered-quantization codec with an analytic reverse sampler.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, trials=False):
        sp.add_argument("--schedule", default="cosine",
                        help="cosine | cosine:<n> | linear | linear:<n>,<bmin>,<bmax> "
                             "| file:<path> (default cosine)")
        sp.add_argument("--seed", type=_seed, default=0, help="u64 root seed")
        if trials:
            sp.add_argument("--t-grid", type=_t_grid, default=_t_grid(_T_GRID_DEFAULT),
                            help=f"ascending timesteps (default {_T_GRID_DEFAULT})")
            sp.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
            sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                            help="samples per trial")
            sp.add_argument("--csv", default=None, help="output path (default stdout)")
            sp.add_argument("--verify", action="store_true",
                            help="check result invariants; nonzero exit on violation")

    sp = sub.add_parser("compress", help="encode an image or synthetic source")
    sp.add_argument("--in", dest="infile", required=True,
                    help="PGM path, or a source spec like gaussian(0,1)")
    sp.add_argument("--t", type=int, required=True, help="quantization timestep")
    sp.add_argument("--out", required=True, help="container output path")
    sp.add_argument("--block", type=int, default=8, help="transform block size for images")
    sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                    help="sample count for synthetic sources")
    add_common(sp)
    sp.set_defaults(fn=_cmd_compress)

    sp = sub.add_parser("decompress", help="decode a container to an image or .npy")
    sp.add_argument("--in", dest="infile", required=True, help="container path")
    sp.add_argument("--out", required=True, help=".pgm for images, .npy for raw data")
    sp.add_argument("--denoiser", default="gaussian",
                    help="gaussian | uniform | gmm:<json path> (default gaussian)")
    sp.add_argument("--steps", type=int, default=None,
                    help="reverse step count (default: every step)")
    add_common(sp)
    sp.set_defaults(fn=_cmd_decompress)

    sp = sub.add_parser("rd-sweep", help="rate-distortion curve over timesteps")
    sp.add_argument("--source", default="gaussian(0,1)")
    sp.add_argument("--denoiser", default="gaussian")
    add_common(sp, trials=True)
    sp.set_defaults(fn=_cmd_rd_sweep)

    sp = sub.add_parser("ablate", help="measure one codec/denoiser mismatch")
    sp.add_argument("experiment", choices=("noise-level", "noise-type", "discretization"))
    sp.add_argument("--source", default=None,
                    help="gmm:<json path> or gaussian(m,s) (default: built-in mixture)")
    sp.add_argument("--assume", choices=("gaussian", "uniform"), default="gaussian",
                    help="noise family the noise-level reconstruction assumes")
    add_common(sp, trials=True)
    sp.set_defaults(fn=_cmd_ablate)

    sp = sub.add_parser("schedule-dump", help="write a schedule as text or CSV")
    sp.add_argument("--out", default=None, help="canonical text output (default stdout)")
    sp.add_argument("--csv", default=None, help="write t/alpha_bar/delta/snr table instead")
    add_common(sp)
    sp.set_defaults(fn=_cmd_schedule_dump)

    sp = sub.add_parser("source-sample", help="draw from a source spec as CSV")
    sp.add_argument("--source", required=True)
    sp.add_argument("--n", type=int, default=DEFAULT_SAMPLES)
    sp.add_argument("--csv", default=None, help="output path (default stdout)")
    add_common(sp)
    sp.set_defaults(fn=_cmd_source_sample)

    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, ContainerError, DecodeError) as e:
        _status(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
