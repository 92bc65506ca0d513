"""The three mismatches between a quantizing codec and its denoiser.

1. noise type: the denoiser assumes Gaussian noise but the quantizer emits
   uniform noise; measured by running both posterior means on identical data.
2. noise level: the denoiser assumes timestep t_r while data was quantized at
   t_s; measured over the full (t_s, t_r) grid, the diagonal should win.
3. discretization: hard rounding versus dithered rounding feeding the same
   denoiser; dithering should win wherever the gap is resolvable, because
   its error matches the noise model (at tiny t the two are statistically
   tied and the sign is Monte-Carlo noise; the standard errors say which).

Every experiment is a pure function of (arguments, seed); rerunning this
script reproduces the numbers bit for bit. Sizes here are trimmed for a
quick run; the test suite runs the full-scale versions.
"""

from uqdc import (
    DEMO_GMM,
    GmmSource,
    ablate_discretization,
    ablate_noise_level,
    ablate_noise_type,
    make_cosine_schedule,
)

vs = make_cosine_schedule(50)
grid = [2, 10, 20, 40]
kw = dict(trials=32, samples=2048, seed=0)

print("noise type (3-component mixture): gap = gaussian-assume mse - uniform-aware mse")
r = ablate_noise_type(DEMO_GMM, vs, grid, **kw)
for row in r.rows:
    rec = dict(zip(r.columns, row))
    print(
        f"  t={rec['t']:>2}: gap {rec['gap']:+.2e} "
        f"({rec['gap'] / rec['gap_se']:+6.1f} standard errors) -> {rec['winner']}"
    )

print("\nnoise level (unit Gaussian): mse of (quantized at t_s, assumed t_r)")
r = ablate_noise_level(GmmSource.single(0.0, 1.0), vs, grid, grid, **kw)
header = "  t_s\\t_r " + "".join(f"{t:>10}" for t in grid)
print(header)
for t_s in grid:
    cells = {row[1]: row for row in r.rows if row[0] == t_s}
    line = f"  {t_s:>7} "
    for t_r in grid:
        mark = "*" if cells[t_r][4] else " "
        line += f"{cells[t_r][2]:>9.4f}{mark}"
    print(line)
print("  (* = row minimum; it should track the diagonal)")

print("\ndiscretization (3-component mixture): gap = hard mse - dithered mse")
r = ablate_discretization(DEMO_GMM, vs, grid, **kw)
for row in r.rows:
    rec = dict(zip(r.columns, row))
    print(
        f"  t={rec['t']:>2}: gap {rec['gap']:+.2e} "
        f"({rec['gap'] / rec['gap_se']:+6.1f} standard errors) -> {rec['winner']}"
    )
