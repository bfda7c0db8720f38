"""Tests for the simulated CKKS slot machine."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hesoftmax.errors import DomainError, FixedPointOverflowError, OutOfBudgetError
from hesoftmax.polyapprox import ApproxSpec, Polynomial, chebyshev_interpolant, remez_minimax
from hesoftmax.slotvm import CostLedger, SlotVM, VmConfig


@pytest.fixture
def vm4():
    return SlotVM(VmConfig(n_slots=4, p=20, p_bts=None, top_level=9))


class TestEncodeAndArithmetic:
    def test_encode_rounds_half_even_to_grid(self):
        vm = SlotVM(VmConfig(n_slots=4, p=4))
        # 1/3 * 16 = 5.33 -> 5
        assert vm.encode([1 / 3]).slots[0] == 5 / 16
        # 2.5 / 16 ties to even (2)
        assert vm.encode([2.5 / 16]).slots[0] == 2 / 16

    def test_exact_mode_does_not_round(self):
        vm = SlotVM(VmConfig(n_slots=4, p=4, exact=True))
        assert vm.encode([1 / 3]).slots[0] == 1 / 3

    def test_encode_pads_and_sets_level(self, vm4):
        ct = vm4.encode([1.0, 2.0])
        assert ct.level == 9
        np.testing.assert_array_equal(ct.slots, [1, 2, 0, 0])

    def test_add_is_free_and_takes_min_level(self, vm4):
        a = vm4.encode([1.0], level=5)
        b = vm4.encode([2.0], level=7)
        c = vm4.add(a, b)
        assert c.level == 5 and c.slots[0] == 3.0
        assert vm4.ledger.additions == 1
        assert vm4.ledger.levels_consumed_main == 0

    def test_mult_ct_consumes_one_level(self, vm4):
        a = vm4.encode([1.5, 2.0])
        c = vm4.mult_ct(a, a)
        assert c.level == 8
        np.testing.assert_allclose(c.slots[:2], [2.25, 4.0])
        assert vm4.ledger.mult_ct_ct == 1
        assert vm4.ledger.levels_consumed_main == 1

    def test_mult_pt_consumes_level_but_scalar_does_not(self, vm4):
        a = vm4.encode([1.0, 2.0, 3.0, 4.0])
        assert vm4.mult_pt(a, [1, 0, 1, 0]).level == 8
        assert vm4.mult_const(a, 0.5).level == 9
        assert vm4.ledger.mult_pt_ct == 2

    def test_level_zero_multiplication_raises(self, vm4):
        a = vm4.encode([1.0], level=0)
        with pytest.raises(OutOfBudgetError):
            vm4.mult_ct(a, a)

    def test_overflow_detected(self, vm4):
        a = vm4.encode([2.0**20])
        with pytest.raises(FixedPointOverflowError):
            vm4.mult_ct(a, a)

    def test_contexts_do_not_mix(self, vm4):
        other = SlotVM(vm4.cfg)
        with pytest.raises(ValueError):
            vm4.add(vm4.encode([1.0]), other.encode([1.0]))


class TestRotation:
    def test_rotate_left_by_one(self, vm4):
        out = vm4.rotate(vm4.encode([1, 2, 3, 4]), 1)
        np.testing.assert_array_equal(out.slots, [2, 3, 4, 1])
        assert vm4.ledger.rotations == 1

    def test_negative_rotation_is_right_shift(self, vm4):
        out = vm4.rotate(vm4.encode([1, 2, 3, 4]), -1)
        np.testing.assert_array_equal(out.slots, [4, 1, 2, 3])

    @given(st.lists(st.integers(-8, 8), min_size=1, max_size=6))
    @settings(max_examples=40, deadline=None)
    def test_rotations_compose(self, shifts):
        vm = SlotVM(VmConfig(n_slots=8, exact=True))
        v = np.arange(8.0)
        ct = vm.encode(v)
        for s in shifts:
            ct = vm.rotate(ct, s)
        np.testing.assert_array_equal(ct.slots, np.roll(v, -sum(shifts)))


class TestBootstrap:
    def test_restores_top_level_and_counts_by_thread(self):
        vm = SlotVM(VmConfig.fgb(8, seed=3))
        ct = vm.encode(np.linspace(0, 1, 8), level=4)
        out = vm.bootstrap(ct)
        aux = vm.bootstrap(vm.retag(ct, "aux"))
        assert out.level == aux.level == 12
        assert vm.ledger.bootstraps == 2
        assert vm.ledger.bootstraps_main == 1 and vm.ledger.bootstraps_aux == 1

    def test_noise_bounded_by_p_bts(self):
        vm = SlotVM(VmConfig.fgb(1024, seed=11))
        v = np.linspace(-1, 1, 1024)
        out = vm.bootstrap(vm.encode(v, level=5))
        err = np.abs(out.slots - vm.encode(v).slots)
        assert err.max() <= 2.0**-22 + 2.0**-29
        assert err.max() > 0

    def test_noise_is_seeded(self):
        runs = []
        for _ in range(2):
            vm = SlotVM(VmConfig.fgb(64, seed=5))
            runs.append(vm.bootstrap(vm.encode(np.ones(64), level=4)).slots)
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_below_floor_cannot_bootstrap(self):
        vm = SlotVM(VmConfig.fgb(8))
        with pytest.raises(OutOfBudgetError):
            vm.bootstrap(vm.encode([1.0], level=2))


class TestLevelAccounting:
    def test_parallel_chains_charged_once(self):
        vm = SlotVM(VmConfig(n_slots=4, top_level=10, exact=True))
        a, b = vm.encode([1.0]), vm.encode([2.0])
        vm.mult_ct(a, a)
        vm.mult_ct(b, b)
        assert vm.ledger.levels_consumed_main == 1

    def test_threads_counted_separately(self):
        vm = SlotVM(VmConfig(n_slots=4, top_level=10, exact=True))
        a = vm.encode([1.0])
        x = vm.retag(a, "aux")
        vm.mult_ct(vm.mult_ct(x, x), x)
        vm.mult_ct(a, a)
        assert vm.ledger.levels_consumed_aux == 2
        assert vm.ledger.levels_consumed_main == 1

    def test_ledger_json_names(self):
        keys = set(CostLedger().to_dict())
        assert {
            "mult_ct_ct", "mult_pt_ct", "rotations", "additions", "bootstraps",
            "levels_consumed_main", "levels_consumed_aux",
        } <= keys

    def test_ledgers_add(self):
        a = CostLedger(rotations=2, bootstraps=1)
        b = CostLedger(rotations=3)
        assert (a + b).rotations == 5 and (a + b).bootstraps == 1


class TestEvalPoly:
    @pytest.mark.parametrize("degree", [1, 2, 3, 7, 15, 31, 63, 127])
    def test_depth_and_value(self, degree):
        rng = np.random.default_rng(degree)
        coeffs = rng.normal(size=degree + 1) / np.arange(1, degree + 2)
        poly = Polynomial(coeffs, (-2.0, 3.0), 0.0)
        vm = SlotVM(VmConfig(n_slots=64, top_level=20, exact=True))
        x = np.linspace(-2, 3, 64)
        out = vm.eval_poly(vm.encode(x), poly)
        depth = int(np.ceil(np.log2(degree + 1)))
        assert out.level == 20 - depth
        assert vm.ledger.levels_consumed_main == depth
        np.testing.assert_allclose(out.slots, poly(x), atol=1e-10)

    def test_mult_count_sublinear(self):
        poly = remez_minimax(ApproxSpec("exp", (-4.0, 0.0)), 127)
        vm = SlotVM(VmConfig(n_slots=8, top_level=20, exact=True))
        vm.eval_poly(vm.encode(np.linspace(-4, 0, 8)), poly)
        assert vm.ledger.mult_ct_ct <= 3 * np.sqrt(128) + 7

    def test_out_of_interval_raises(self):
        poly = chebyshev_interpolant("exp", (-1.0, 0.0), 3)
        vm = SlotVM(VmConfig(n_slots=4, exact=True))
        with pytest.raises(DomainError):
            vm.eval_poly(vm.encode([0.5]), poly)

    def test_inactive_slots_ignored_by_domain_check(self):
        poly = chebyshev_interpolant("exp", (-1.0, 0.0), 3)
        vm = SlotVM(VmConfig(n_slots=4, exact=True))
        active = np.array([True, False, False, False])
        out = vm.eval_poly(vm.encode([-0.5, 7.0]), poly, active)
        assert out.slots[0] == pytest.approx(np.exp(-0.5), abs=1e-2)

    def test_insufficient_levels(self):
        poly = chebyshev_interpolant("exp", (-1.0, 0.0), 15)
        vm = SlotVM(VmConfig(n_slots=4, exact=True))
        with pytest.raises(OutOfBudgetError):
            vm.eval_poly(vm.encode([-0.5], level=3), poly)
