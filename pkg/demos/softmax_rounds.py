# Normalize and square, one round at a time
#
# Start from exp(x / 2^k), which is cheap because x / 2^k is small. Then
# square k times, since Softmax(2x) is the normalized square of Softmax(x).
# Normalizing by lambda = (sum y^2)^(-1/2) before each squaring keeps every
# intermediate near 1, which is what lets a fixed-point scheme survive.

import numpy as np

from hesoftmax.analysis import sample_inputs
from hesoftmax.packing import softmax_instances
from hesoftmax.slotvm import VmConfig
from hesoftmax.softmax_core import NormalizationState, SoftmaxParams, softmax_exact

M, n = 256, 128
params = SoftmaxParams(M, n)
print("rounds k =", params.rounds)

x = sample_inputs("normal", M, n, 8, seed=0)
state = NormalizationState()
y, ledger = softmax_instances(x, params, VmConfig.fgb(1024, seed=0), "A", state=state)

for j, (lam, s) in enumerate(zip(state.lambda_trace, state.sums_trace), start=1):
    print(f"round {j}: max lambda {lam.max():8.3f}  sum of y {s.min():.6f} .. {s.max():.6f}")

err = np.abs(y - softmax_exact(x)).max()
print(f"max abs error 2^{np.log2(err):.2f}")
print("main levels", ledger.levels_consumed_main, "(2k + 4 =", 2 * params.rounds + 4, ")")
print("bootstraps main/aux", ledger.bootstraps_main, ledger.bootstraps_aux)

# Version B keeps exp(x / 2^k) and only accumulates the normalizer, so the
# main thread spends k + 5 levels instead of 2k + 4.
yb, lb = softmax_instances(x, params, VmConfig.fgb(1024, seed=0), "B")
print("version B: main levels", lb.levels_consumed_main,
      "error 2^%.2f" % np.log2(np.abs(yb - softmax_exact(x)).max()))
