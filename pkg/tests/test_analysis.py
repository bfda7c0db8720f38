import math

import numpy as np
import pytest

from hesoftmax.analysis import (
    heuristic_B,
    heuristic_B_bound,
    heuristic_loss_bits,
    hetal_level_estimate,
    measure_errors,
    sample_inputs,
    summarize,
    theorem_bound,
)
from hesoftmax.packing import softmax_instances
from hesoftmax.slotvm import CostLedger, VmConfig
from hesoftmax.softmax_core import NormalizationState, SoftmaxParams, compute_k


class TestTheoremBound:
    def test_small_instance(self):
        b = theorem_bound(4, 2, 40)
        assert b.bound == pytest.approx(970.1312 * 2.0**-40)
        assert b.bound == pytest.approx(8.82e-10, rel=1e-3)
        assert b.hypothesis

    def test_zero_rounds(self):
        n = 8
        b = theorem_bound(n, 0, 30)
        assert b.bound == pytest.approx(2.9 * (n + 1 + 15.5 * n * n) * 2.0**-30)
        assert b.a_seq == (2.0**-30,)

    def test_hypothesis_violated(self):
        b = theorem_bound(256, 6, 29)
        assert not b.hypothesis
        assert b.marker == "hypothesis violated"
        assert b.bound > 0

    def test_recurrence_below_closed_form(self):
        for n in (2, 4, 16, 256, 4096):
            for k in range(10):
                b = theorem_bound(n, k, 40)
                assert b.recurrence_within_closed_form
                assert len(b.a_seq) == k + 1

    def test_monotone(self):
        base = theorem_bound(16, 3, 30).bound
        assert theorem_bound(32, 3, 30).bound > base
        assert theorem_bound(16, 4, 30).bound > base
        # larger epsilon means smaller p
        assert theorem_bound(16, 3, 29).bound > base


class TestHeuristics:
    def test_loss(self):
        assert heuristic_loss_bits(6, 256) == 18
        assert heuristic_loss_bits(0, 2) == 1.5

    def test_loss_needs_two(self):
        with pytest.raises(ValueError):
            heuristic_loss_bits(3, 1)

    def test_B_bound(self):
        assert heuristic_B_bound(6, 256) == 16384

    def test_B_uniform_pair(self):
        f = heuristic_B(np.full(2, -2 * math.log(2)), 1)
        assert f.value == pytest.approx(2.0)
        assert f.bound == 4 and f.within

    def test_B_random_traces(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(2 ** rng.integers(1, 8))
            M = float(rng.choice([4, 16, 64, 256]))
            # the bound relies on k being large enough for the input range
            k = compute_k(M, n)
            x = rng.uniform(-M, 0, n)
            assert heuristic_B(x, k).within

    def test_B_from_recorded_trace(self):
        x = sample_inputs("uniform", 32, 8, 1, 1)
        params = SoftmaxParams(32, 8, functions="ideal")
        state = NormalizationState(y_trace=[])
        softmax_instances(x, params, VmConfig.fgb(8, exact=True), "A", state=state)
        lams = [float(v[0]) for v in state.lambda_trace]
        y0 = np.exp(x[0] / 2.0**params.rounds)
        ys = [y0] + [v[0] for v in state.y_trace[:-1]]
        from_trace = heuristic_B(x[0], params.rounds, (lams, ys))
        assert from_trace.value == pytest.approx(heuristic_B(x[0], params.rounds).value, rel=1e-9)

    def test_B_short_trace(self):
        with pytest.raises(ValueError):
            heuristic_B(np.zeros(4), 3, ([1.0], [np.ones(4)]))


class TestHetalEstimate:
    def test_single(self):
        assert hetal_level_estimate(256, 256)["single"] == 64

    def test_amortized(self):
        assert hetal_level_estimate(2, 16)["amortized"] == 4
        assert hetal_level_estimate(128, 256)["amortized"] / math.log2(128) == 4

    def test_labeled(self):
        assert "estimate" in hetal_level_estimate(4, 4)["label"]


class TestMeasureErrors:
    def test_identical(self):
        r = measure_errors([0.5, 0.5], [0.5, 0.5])
        assert r.err_abs == 0 and r.err_abs_bits == math.inf

    def test_one_slot_off(self):
        n, d = 8, 1e-6
        ref = np.full(n, 1 / n)
        out = ref.copy()
        out[3] += d
        r = measure_errors(out, ref)
        assert r.err_abs == pytest.approx(d)
        assert r.err_rel == pytest.approx(d * n)

    def test_rel_dominates_abs(self):
        rng = np.random.default_rng(1)
        ref = rng.dirichlet(np.ones(16), size=5)
        r = measure_errors(ref + rng.normal(0, 1e-6, ref.shape), ref)
        assert r.err_rel >= r.err_abs

    def test_zero_norm(self):
        with pytest.raises(ValueError):
            measure_errors([0.0, 0.1], [0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            measure_errors(np.zeros(4), np.ones(3))

    def test_row(self):
        led = CostLedger(rotations=3, levels_consumed_main=7)
        row = measure_errors([0.25], [0.5], seed=4, ledger=led, n=1, algo="a").to_row()
        assert row["err_abs_bits"] == 2.0 and row["rotations"] == 3
        assert row["levels_main"] == 7 and row["seed"] == 4

    def test_summary(self):
        s = summarize([2.0**-10, 2.0**-12])
        assert s["worst_bits"] == 10
        assert s["average_bits"] == pytest.approx(-math.log2(0.625 * 2.0**-10))
        assert s["std_bits"] == pytest.approx(1.0)


class TestSampler:
    @pytest.mark.parametrize("dist", ["normal", "uniform"])
    def test_range_and_determinism(self, dist):
        a = sample_inputs(dist, 64, 32, 100, 5)
        assert a.shape == (100, 32)
        assert a.min() >= -64 and a.max() <= 0
        np.testing.assert_array_equal(a, sample_inputs(dist, 64, 32, 100, 5))

    def test_normal_mean(self):
        M = 128
        x = sample_inputs("normal", M, 1000, 100, 9)
        assert abs(x.mean() + M / 2) <= M / 100

    def test_unknown(self):
        with pytest.raises(ValueError):
            sample_inputs("cauchy", 8, 4, 1, 0)
