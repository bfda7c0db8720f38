# How far off can the fixed-point loop be?
#
# Each round multiplies the incoming error by about 2.08 sqrt(n) and adds a
# few units of rounding. The closed-form bound is valid once precision is
# high enough; below we compare it with measured runs that use exact
# auxiliary functions, so only rounding contributes.

import numpy as np

from hesoftmax.analysis import heuristic_B, heuristic_loss_bits, sample_inputs, theorem_bound
from hesoftmax.packing import softmax_instances
from hesoftmax.slotvm import VmConfig
from hesoftmax.softmax_core import SoftmaxParams, compute_k, softmax_exact

for n, M in [(4, 32), (8, 32), (16, 64)]:
    k = compute_k(M, n)
    for p in (40, 45):
        b = theorem_bound(n, k, p)
        params = SoftmaxParams(M, n, functions="ideal")
        worst = 0.0
        for seed in range(20):
            x = sample_inputs("uniform", M, n, 1, seed)
            y, _ = softmax_instances(x, params, VmConfig.fgb(n, p=p, p_bts=None, seed=seed), "A")
            worst = max(worst, np.abs(y - softmax_exact(x)).max())
        print(f"n={n:2d} k={k} p={p}: measured {worst:.2e}  bound {b.bound:.2e}  ({b.marker})")

# The typical loss is much smaller than the worst case.
x = sample_inputs("normal", 256, 256, 1, 0)[0]
k = compute_k(256, 256)
B = heuristic_B(x, k)
print(f"n=256 k={k}: heuristic loss {heuristic_loss_bits(k, 256):.1f} bits, "
      f"amplification {B.value:.1f} (bound {B.bound:.0f})")
