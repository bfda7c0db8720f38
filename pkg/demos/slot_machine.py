# Simulated CKKS slots
#
# A ciphertext here is a vector of real "slots" plus a level budget. Every
# ciphertext product uses one level; a bootstrap buys the levels back at the
# price of some noise. Nothing is encrypted: the point is to count costs and
# reproduce fixed-point rounding faithfully.

import numpy as np

from hesoftmax.polyapprox import ApproxSpec, remez_minimax
from hesoftmax.slotvm import SlotVM, VmConfig

vm = SlotVM(VmConfig.fgb(8, seed=1))
x = vm.encode(np.linspace(-1, 0, 8))
print("fresh level:", x.level)

# Products cost a level, additions and rotations do not.
sq = vm.mult_ct(x, x)
rolled = vm.rotate(sq, 1)
total = vm.add(sq, rolled)
print("after one product:", total.level)
print("slots:", np.round(total.slots, 6))

# Polynomials are evaluated in the Chebyshev basis with depth ceil(log2(d + 1)).
poly = remez_minimax(ApproxSpec("exp", (-1.0, 0.0)), 7)
y = vm.eval_poly(x, poly)
print("degree 7 exp uses", x.level - y.level, "levels, max error",
      np.abs(y.slots - np.exp(np.linspace(-1, 0, 8))).max())

# When the budget runs low, bootstrap. The noise is bounded by 2^-p_bts.
low = vm.level_down(y, vm.cfg.bts_floor)
fresh = vm.bootstrap(low)
print("bootstrap:", low.level, "->", fresh.level,
      "noise", np.abs(fresh.slots - low.slots).max())

print(vm.ledger.to_json())
