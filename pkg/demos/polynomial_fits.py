# Fitting the two auxiliary functions
#
# Softmax needs exp on a short negative interval and x -> 1/sqrt(x) on an
# interval bounded away from zero. For the inverse square root the useful
# error is relative, sup |P(x) sqrt(x) - 1|, so the fit is weighted.

import math

import numpy as np

from hesoftmax.polyapprox import (
    ApproxSpec,
    chebyshev_interpolant,
    design_invsqrt,
    fit_to_bits,
    remez_minimax,
)

# exp on [-M / 2^k, 0] for M = 256, k = 6
spec = ApproxSpec("exp", (-4.0, 0.0), target_bits=20)
p = fit_to_bits(spec)
print(f"exp: degree {p.degree}, depth {p.depth}, error 2^{math.log2(p.verified_err):.1f}")

# Remez against plain interpolation at the same degree
interval = (1 / 128, 1.1)
for degree in (7, 15, 31):
    c = chebyshev_interpolant("invsqrt", interval, degree, weighted=True)
    r = remez_minimax(ApproxSpec("invsqrt", interval, weighted=True), degree)
    print(f"degree {degree:3d}: interpolant {c.verified_err:.3e}  minimax {r.verified_err:.3e}")

# For a wide interval, a low-degree seed refined by Newton steps can be cheaper.
for mode in ("minimax-only", "newton-hybrid"):
    plan = design_invsqrt((1 / 1024, 1.1), 20, mode)
    print(f"{mode}: seed degree {plan.seed.degree}, {plan.iters} Newton steps, "
          f"depth {plan.depth}, error {plan.verified_err:.2e}")

xs = np.geomspace(1 / 128, 1.1, 5)
best = fit_to_bits(ApproxSpec("invsqrt", interval, 10, weighted=True))
print("P(x) sqrt(x):", np.round(best(xs) * np.sqrt(xs), 5))
