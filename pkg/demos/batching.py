# Sharing one auxiliary ciphertext across many
#
# With n larger than a ciphertext can hold comfortably, coordinates are
# split across m ciphertexts. The main work happens on each of them, but the
# normalizer is computed once on a single auxiliary ciphertext, so its level
# cost is spread over m.

from hesoftmax.analysis import hetal_level_estimate, sample_inputs
from hesoftmax.layout import PackingLayout
from hesoftmax.packing import amortized_report, softmax_instances
from hesoftmax.slotvm import VmConfig
from hesoftmax.softmax_core import SoftmaxParams

n, M, N0 = 256, 128, 256
params = SoftmaxParams(M, n)

print(" m   variant  levels/ct  rotations  main bts")
for variant in ("A", "B"):
    for m in (1, 2, 4, 8):
        layout = PackingLayout.many(N0, n, m) if m > 1 else PackingLayout.single(N0, n)
        x = sample_inputs("normal", M, n, layout.L, seed=m)
        _, led = softmax_instances(x, params, VmConfig.fgb(N0, seed=m), variant, m)
        r = amortized_report(led, m)
        print(f"{m:2d}   {variant:7s}  {r.levels_per_ct:9.3f}  {led.rotations:9d}  {r.bootstraps_main:8d}")

est = hetal_level_estimate(M, n)
print(f"max-subtraction estimate: {est['single']:.0f} levels single, "
      f"{est['amortized']:.0f} amortized ({est['label']})")
