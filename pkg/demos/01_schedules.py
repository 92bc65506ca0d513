"""Variance schedules and the step-size rule that ties quantization to them.

A schedule assigns each timestep t a signal fraction alpha_bar in (0, 1).
The quantizer's bin width at t is chosen so its uniform error carries exactly
the noise power the schedule calls for: delta = sqrt(12 * (1 - alpha_bar)),
because a U(-d/2, d/2) variable has variance d^2 / 12.
"""

import numpy as np

from uqdc import (
    QuantizationSchedule,
    delta_for_alpha,
    make_cosine_schedule,
    make_linear_schedule,
    schedule_digest,
    snr_theoretical,
)

cos = make_cosine_schedule(50)
lin = make_linear_schedule(1000, 1e-4, 0.02)
qs = QuantizationSchedule.from_variance(cos)

print("cosine-50 schedule, selected steps (unit-power source):")
print(f"{'t':>4} {'alpha_bar':>12} {'delta':>10} {'snr':>12}")
for t in (0, 1, 5, 10, 25, 40, 50):
    print(
        f"{t:>4} {cos.alpha_at(t):>12.6f} {qs.delta(t):>10.4f} "
        f"{snr_theoretical(cos, t, 1.0):>12.4g}"
    )

print("\nhalfway point: alpha_bar(25) =", cos.alpha_at(25), "(squared cosine of pi/4)")
print("linear-1000 endpoint: alpha_bar(1000) =", lin.alpha_at(1000))

a = np.linspace(0.01, 0.99, 9)
gap = np.max(np.abs(delta_for_alpha(a) ** 2 / 12.0 - (1.0 - a)))
print(f"\nvariance identity delta^2/12 == 1 - alpha_bar: max abs gap {gap:.2e}")

print("\nschedules are content-addressed; receivers refuse a digest mismatch:")
print("  cosine-50 digest:", schedule_digest(cos).hex())
print("  linear-1000 digest:", schedule_digest(lin).hex())
