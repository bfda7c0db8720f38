"""Softmax by repeated normalization and squaring on the slot VM.

The input ``x`` in ``[-M, 0]^n`` is scaled down by ``2**k``, exponentiated,
and then ``k`` rounds of "normalize, then square" rebuild
``Softmax(x) = Softmax(2**k * (x / 2**k))`` while keeping every
intermediate vector close to the unit sphere. The normalizer
``(sum y_i^2)^(-1/2)`` is computed by an auxiliary thread that sums with a
rotate-add tree, applies an inverse square root and broadcasts the result
back to every coordinate.

Variants:
    * ``softmax_A``: the basic loop (main thread uses 2 levels per round).
    * ``softmax_B``: keeps ``y0 = exp(x / 2**k)`` and only updates the
      normalizer, recomputing ``y^(j) = (lam * y0)^(2^j)``. The main thread
      uses ``k + 1`` levels after the exponential.
    * ``softmax_naive``: exponentiate and divide by the sum.
    * ``strategy="t-power"``: normalize the ``t``-th power instead of squares.
    * ``strategy="square-and-normalize"``: square first, then scale by
      ``lam**2``.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import DomainError, InfeasibleError, OutOfBudgetError
from .layout import PackingLayout
from .polyapprox import ApproxSpec, Polynomial, fit_to_bits, remez_minimax, verification_grid
from .slotvm import Ciphertext, SlotVM

STRATEGIES = ("normalize-and-square", "square-and-normalize", "t-power")
MAX_FIT_T = 9
INTERVAL_MARGIN = 2.0**-8


def compute_k(M: float, n: int) -> int:
    """Number of normalize-and-square rounds, ``ceil(log2 M - log2 ln n)``.

    Returns 0 (plain exponentiate-and-divide) when the formula is not positive.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    if n < 2:
        return 0
    return max(0, math.ceil(math.log2(M) - math.log2(math.log(n))))


def compute_k_t(M: float, n: int, t: int) -> int:
    """Round count for ``t``-th power normalization: ``ceil(log_t(M / ln n))``."""
    if n < 2:
        return 0
    return max(0, math.ceil(math.log(M / math.log(n)) / math.log(t) - 1e-12))


def softmax_exact(x) -> np.ndarray:
    """Reference Softmax along the last axis in extended precision."""
    v = np.asarray(x, dtype=np.longdouble)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return (e / e.sum(axis=-1, keepdims=True)).astype(np.float64)


def tpower_range(n: int, t: int) -> tuple:
    """Range of ``sum y_i**t`` over nonnegative ``y`` with ``sum y_i = 1``."""
    if t < 2:
        raise ValueError("t must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (float(n) ** -(t - 1), 1.0)


@dataclass(frozen=True)
class SoftmaxParams:
    """Algorithm parameters.

    Attributes:
        M: inputs are assumed to lie in ``[-M, 0]``.
        n: Softmax dimension (a power of two).
        k: number of rounds; ``None`` uses :func:`compute_k`.
        strategy: one of :data:`STRATEGIES`.
        t: power for ``strategy="t-power"``.
        alpha_mid: tolerance on ``|sum y - 1|`` kept by intermediate rounds.
        final_bits: accuracy of the last normalizer.
        exp_bits: accuracy of the exponential. ``None`` fixes its depth to
            ``exp_depth`` (degree ``2**exp_depth - 1``) instead.
        exp_depth: levels spent on the exponential.
        functions: ``"poly"`` for fitted polynomials, ``"ideal"`` for exact
            functions with rounding, ``"auto"`` for ideal in exact mode.
        bts_schedule: ``"late"`` picks the fewest auxiliary bootstraps and
            places them as late as possible; ``"greedy"`` bootstraps whenever
            the next step would not fit.
        ideal_depth: levels charged for an ideal inverse root.
    """

    M: float
    n: int
    k: Optional[int] = None
    strategy: str = "normalize-and-square"
    t: int = 2
    alpha_mid: float = 2.0**-5
    final_bits: float = 19.5
    exp_bits: Optional[float] = None
    exp_depth: int = 4
    functions: str = "auto"
    bts_schedule: str = "late"
    ideal_depth: int = 6

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("M must be positive")
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy != "t-power" and self.t != 2:
            raise ValueError("t only applies to strategy='t-power'")
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.k is not None and self.k < 0:
            raise ValueError("k must be >= 0")
        if self.functions not in ("auto", "poly", "ideal"):
            raise ValueError(f"unknown functions mode {self.functions!r}")
        if self.bts_schedule not in ("late", "greedy"):
            raise ValueError(f"unknown bootstrap schedule {self.bts_schedule!r}")

    @property
    def rounds(self) -> int:
        if self.k is not None:
            return self.k
        if self.strategy == "t-power":
            return compute_k_t(self.M, self.n, self.t)
        return compute_k(self.M, self.n)


@dataclass
class NormalizationState:
    """Decoded diagnostics of one run, one entry per round.

    ``lambda_trace[j]`` holds the normalizer applied in round ``j + 1`` for
    each instance (for version B, the accumulated normalizer), and
    ``sums_trace[j]`` holds ``sum_i y_i`` after that round and
    ``aux_rotations[j]`` the rotations spent by that round's auxiliary thread.
    Set ``y_trace`` to an empty list to also keep every round's output vector.
    """

    lambda_trace: list = field(default_factory=list)
    sums_trace: list = field(default_factory=list)
    y_trace: Optional[list] = None
    z_max_trace: list = field(default_factory=list)
    aux_rotations: list = field(default_factory=list)

    def to_json(self) -> str:
        d = {
            "lambda_trace": [np.asarray(v).tolist() for v in self.lambda_trace],
            "sums_trace": [np.asarray(v).tolist() for v in self.sums_trace],
            "z_max_trace": [np.asarray(v).tolist() for v in self.z_max_trace],
            "aux_rotations": list(self.aux_rotations),
        }
        if self.y_trace is not None:
            d["y_trace"] = [np.asarray(v).tolist() for v in self.y_trace]
        return json.dumps(d)


# -- function plans ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FunctionPlan:
    """How one slot-wise function is evaluated.

    Attributes:
        name: ``"exp"`` or ``"rootinv"`` (``x ** -power``).
        interval: inputs the plan is designed for.
        depth: levels consumed.
        err: achieved error. Relative error ``|P x**power - 1|`` for inverse
            roots; for exp, ``max |P / exp - 1|``.
        power: exponent of the inverse root.
        poly: fitted polynomial, or ``None`` for an ideal evaluation.
    """

    name: str
    interval: tuple
    depth: int
    err: float
    power: float = 0.5
    poly: Optional[Polynomial] = None

    @property
    def degree(self) -> Optional[int]:
        return None if self.poly is None else self.poly.degree

    def fn(self):
        if self.name == "exp":
            return np.exp
        p = self.power
        return lambda v: np.power(v, -p)

    def evaluate(self, vm: SlotVM, ct: Ciphertext, active=None) -> Ciphertext:
        if self.poly is not None:
            return vm.eval_poly(ct, self.poly, active)
        if self.name != "exp":
            v = ct.slots if active is None else ct.slots[active]
            if np.any(v <= 0):
                raise DomainError("inverse root of a non-positive sum")
        return vm.map_exact(ct, self.fn(), self.depth, active)


@dataclass(frozen=True, eq=False)
class SoftmaxPlans:
    """All functions one Softmax evaluation needs, in order of use."""

    variant: str
    k: int
    t: int
    exp: FunctionPlan
    steps: tuple

    def describe(self) -> list:
        rows = [("exp", self.exp.interval, self.exp.degree, self.exp.depth, self.exp.err)]
        for j, s in enumerate(self.steps, 1):
            rows.append((f"step{j} x^-{s.power:g}", s.interval, s.degree, s.depth, s.err))
        return rows


def _exp_relative_error(poly: Polynomial) -> float:
    x = verification_grid(poly.interval, poly.degree)
    return float(np.max(np.abs(poly(x) / np.exp(x) - 1.0)))


def _fit_exp(params: SoftmaxParams, lo: float, ideal: bool) -> FunctionPlan:
    interval = (lo, 0.0)
    if ideal:
        return FunctionPlan("exp", interval, params.exp_depth, 0.0)
    if params.exp_bits is None:
        poly = remez_minimax(ApproxSpec("exp", interval), 2**params.exp_depth - 1)
    else:
        poly = fit_to_bits(ApproxSpec("exp", interval, params.exp_bits), max_t=MAX_FIT_T, strict=False)
    return FunctionPlan("exp", interval, poly.depth, _exp_relative_error(poly), poly=poly)


def _fit_root(interval, power: float, target_err: float, cap: int, ideal: bool, ideal_depth: int) -> FunctionPlan:
    lo, hi = interval
    interval = (lo * (1.0 - INTERVAL_MARGIN), hi * (1.0 + INTERVAL_MARGIN))
    if ideal:
        return FunctionPlan("rootinv", interval, min(ideal_depth, cap), 0.0, power)
    bits = max(1.0, -math.log2(target_err))
    spec = ApproxSpec("invsqrt", interval, bits, weighted=True, power=power)
    poly = fit_to_bits(spec, max_t=min(cap, MAX_FIT_T), strict=False)
    return FunctionPlan("rootinv", interval, poly.depth, poly.verified_err, power, poly)


def _use_ideal(params: SoftmaxParams, exact: bool) -> bool:
    return params.functions == "ideal" or (params.functions == "auto" and exact)


def build_plans(params: SoftmaxParams, variant: str = "A", exact: bool = False, cycle_levels: int = 9) -> SoftmaxPlans:
    """Design the exponential and every per-round inverse root.

    Each round's input interval follows from the previous round's achieved
    accuracy, so a loose intermediate fit widens the next interval rather
    than silently breaking it.

    Args:
        params: algorithm parameters.
        variant: ``"A"``, ``"B"`` or ``"naive"``.
        exact: whether the VM runs in exact mode (affects ``functions="auto"``).
        cycle_levels: levels available between bootstraps; caps the depth of
            each auxiliary function.
    """
    return _build_plans(params, variant, bool(exact), int(cycle_levels))


@functools.lru_cache(maxsize=64)
def _build_plans(params: SoftmaxParams, variant: str, exact: bool, cycle_levels: int) -> SoftmaxPlans:
    ideal = _use_ideal(params, exact)
    n, M = params.n, params.M
    k = params.rounds
    if variant == "naive" or (k == 0 and n > 1):
        ratio = math.exp(min(M, 700.0))
        if ratio > 2.0**20:
            raise InfeasibleError(
                f"exponentiate-and-divide needs an inverse on a range of ratio e^{M:g} > 2^20"
            )
        exp_params = params if params.exp_bits is not None else replace(params, exp_bits=params.final_bits + M / math.log(2))
        exp = _fit_exp(exp_params, -M, ideal)
        interval = (n * math.exp(-M) * (1 - exp.err), n * (1 + exp.err))
        cap = max(1, cycle_levels - 2)
        step = _fit_root(interval, 0.5, 2.0 ** -(params.final_bits + 1), cap, ideal, params.ideal_depth)
        return SoftmaxPlans("naive", 0, 2, exp, (step,))

    t = params.t if params.strategy == "t-power" else 2
    exp = _fit_exp(params, -M / t**k, ideal)
    eta = exp.err
    y_lo = math.exp(-M / t**k) * (1.0 - eta)
    first = (n * y_lo**t, n * (1.0 + eta) ** t)
    steps = []
    prev_err = None
    for j in range(1, k + 1):
        last = j == k
        if variant == "B":
            power = 2.0**-j
            extra = 1 if j > 1 else 0
            if last:
                target = 2.0 ** -(params.final_bits + j - 1)
            else:
                target = (1.0 + params.alpha_mid) ** (2.0**-j) - 1.0
            if j == 1:
                interval = first
            else:
                e = 2 ** (j - 1)
                a, b = (1 - prev_err) ** e, (1 + prev_err) ** e
                interval = (a * a / n, b * b)
        else:
            power = 1.0 / t
            extra = 1 if params.strategy == "square-and-normalize" else 0
            target = 2.0**-params.final_bits if last else (1.0 + params.alpha_mid) ** (1.0 / t) - 1.0
            if j == 1:
                interval = first
            else:
                a, b = (1 - prev_err) ** t, (1 + prev_err) ** t
                interval = (a**t / n ** (t - 1), b**t)
        cap = max(1, cycle_levels - 1 - extra)
        plan = _fit_root(interval, power, target, cap, ideal, params.ideal_depth)
        steps.append(plan)
        prev_err = plan.err
    return SoftmaxPlans(variant, k, t, exp, tuple(steps))


# -- ciphertext helpers --------------------------------------------------


def _power(vm: SlotVM, ct: Ciphertext, t: int) -> Ciphertext:
    """``ct ** t`` with depth ``ceil(log2 t)``."""
    if t == 1:
        return ct
    squares = [ct]
    while 2 ** len(squares) <= t:
        squares.append(vm.mult_ct(squares[-1], squares[-1]))
    terms = [squares[i] for i in range(len(squares)) if (t >> i) & 1]
    while len(terms) > 1:
        terms.sort(key=lambda c: -c.level)
        a, b = terms.pop(), terms.pop()
        terms.append(vm.mult_ct(a, b))
    return terms[0]


def _rotate_sum(vm: SlotVM, ct: Ciphertext, stride: int, steps: int, sign: int) -> Ciphertext:
    for j in range(steps):
        ct = vm.add(ct, vm.rotate(ct, sign * stride * 2**j))
    return ct


def _ceil_log2(t: int) -> int:
    return math.ceil(math.log2(t)) if t > 1 else 0


@dataclass
class _Stage:
    levels: int
    per_ct: bool = False
    cap: Optional[int] = None  # the stage multiplies by a ciphertext at level cap + 1


def _plan_bootstraps(vm: SlotVM, start: int, stages: Sequence[_Stage], m: int, min_level: int,
                     schedule: str) -> tuple:
    """Choose where to bootstrap in a chain of auxiliary stages.

    Returns indices ``i`` meaning "bootstrap before stage ``i``"; index
    ``len(stages)`` means after the last one. A bootstrap before a per-
    ciphertext stage costs ``m``.
    """
    top, floor = vm.cfg.top_level, vm.cfg.bts_floor

    def simulate(points):
        level = start
        for i in range(len(stages) + 1):
            if i in points:
                if level < floor:
                    return None
                level = top
            if i == len(stages):
                break
            level -= stages[i].levels
            if stages[i].cap is not None:
                level = min(level, stages[i].cap)
            if level < 0:
                return None
        return level if level >= min_level else None

    def cost(points):
        return sum(m if (i < len(stages) and stages[i].per_ct) else 1 for i in points)

    if schedule == "greedy":
        points, level = [], start
        for i, st in enumerate(stages):
            if level - st.levels < floor and level >= floor:
                points.append(i)
                level = top
            level -= st.levels
            if st.cap is not None:
                level = min(level, st.cap)
        if level < min_level:
            points.append(len(stages))
        if simulate(points) is not None:
            return tuple(points)

    slots = range(len(stages) + 1)
    best = None
    for r in range(0, 4):
        for points in itertools.combinations(slots, r):
            if simulate(set(points)) is None:
                continue
            key = (cost(points), tuple(-p for p in reversed(points)))
            if best is None or key < best[0]:
                best = (key, points)
        if best is not None:
            return best[1]
    raise OutOfBudgetError(
        f"no bootstrap placement fits stages {[s.levels for s in stages]} from level {start} "
        f"(top {top}, floor {floor}, need {min_level})"
    )


class _Run:
    """One Softmax evaluation over ``m`` main-thread ciphertexts."""

    def __init__(self, vm: SlotVM, params: SoftmaxParams, plans: SoftmaxPlans,
                 layout: PackingLayout, state: Optional[NormalizationState]):
        self.vm, self.params, self.plans, self.layout, self.state = vm, params, plans, layout, state
        self.active = layout.active_mask()

    # -- auxiliary thread ----------------------------------------------

    def aux(self, ys: List[Ciphertext], t: int, plan: FunctionPlan, min_level: int,
            post=None, post_levels: int = 0, post_cap: Optional[int] = None) -> Ciphertext:
        """Broadcast ``(sum_i y_i**t) ** -power`` to every coordinate of every lane.

        Squares (or raises to ``t``) every ciphertext, sums its coordinates
        with a rotate-add tree, adds the ``m`` partial sums, evaluates the
        plan, optionally applies ``post`` (extra levels ``post_levels``),
        masks coordinate 0 and broadcasts it back with a second tree.
        """
        vm, lay = self.vm, self.layout
        rot0 = vm.ledger.rotations
        stages = [_Stage(_ceil_log2(t), per_ct=True), _Stage(plan.depth)]
        if post is not None:
            stages.append(_Stage(post_levels, cap=post_cap))
        stages.append(_Stage(1))
        points = _plan_bootstraps(vm, ys[0].level, stages, len(ys), min_level, self.params.bts_schedule)

        def maybe_bts(ct, i):
            return vm.bootstrap(ct) if i in points else ct

        parts = []
        for y in ys:
            ya = maybe_bts(vm.retag(y, "aux"), 0)
            p = _power(vm, ya, t)
            parts.append(_rotate_sum(vm, p, lay.stride, lay.tree_depth, -1))
        acc = parts[0]
        for p in parts[1:]:
            acc = vm.add(acc, p)
        acc = maybe_bts(acc, 1)
        lam = plan.evaluate(vm, acc, self.active)
        i = 2
        if post is not None:
            lam = maybe_bts(lam, i)
            lam = post(lam)
            i += 1
        lam = maybe_bts(lam, i)
        lam = vm.mult_pt(lam, lay.lane_mask())
        lam = maybe_bts(lam, i + 1)
        if lam.level < min_level:
            lam = vm.bootstrap(lam)
        lam = _rotate_sum(vm, lam, lay.stride, lay.tree_depth, +1)
        if self.state is not None:
            self.state.aux_rotations.append(vm.ledger.rotations - rot0)
        return lam

    # -- main thread ---------------------------------------------------

    def ensure(self, ys: List[Ciphertext], need: int, keep_floor: bool) -> List[Ciphertext]:
        floor = self.vm.cfg.bts_floor if keep_floor else 0
        if ys[0].level - need >= floor:
            return ys
        if ys[0].level < self.vm.cfg.bts_floor:
            raise OutOfBudgetError(f"main ciphertext at level {ys[0].level} can no longer be bootstrapped")
        return [self.vm.bootstrap(y) for y in ys]

    def exponentiate(self, xs: List[Ciphertext], scale: float) -> List[Ciphertext]:
        vm = self.vm
        M = self.params.M
        for x in xs:
            vm.check_domain(x, (-M, 0.0), self.active, what="Softmax input")
        xs = self.ensure(xs, self.plans.exp.depth, keep_floor=False)
        return [self.plans.exp.evaluate(vm, vm.mult_const(x, scale), self.active) for x in xs]

    def record(self, ys: List[Ciphertext], lam: Optional[Ciphertext], zs=None) -> None:
        if self.state is None:
            return
        lay = self.layout
        y = lay.unpack_arrays([c.slots for c in ys])
        self.state.sums_trace.append(y.sum(axis=1))
        if lam is not None:
            self.state.lambda_trace.append(lam.slots[: lay.L].copy())
        if zs is not None:
            z = lay.unpack_arrays([c.slots for c in zs])
            self.state.z_max_trace.append(z.max(axis=1))
        if self.state.y_trace is not None:
            self.state.y_trace.append(y)

    def run_A(self, xs: List[Ciphertext]) -> List[Ciphertext]:
        vm, plans = self.vm, self.plans
        t, k = plans.t, plans.k
        ys = self.exponentiate(xs, float(t) ** -k)
        sq_first = self.params.strategy == "square-and-normalize"
        need = 1 + _ceil_log2(t)
        for j in range(1, k + 1):
            ys = self.ensure(ys, need, keep_floor=j < k)
            level = ys[0].level
            if sq_first:
                lam = self.aux(ys, t, plans.steps[j - 1], level - 1,
                               post=lambda c: vm.mult_ct(c, c), post_levels=1)
                sq = [vm.mult_ct(y, y) for y in ys]
                ys = [vm.mult_ct(s, lam) for s in sq]
                self.record(ys, lam)
                continue
            lam = self.aux(ys, t, plans.steps[j - 1], level)
            zs = [vm.mult_ct(y, lam) for y in ys]
            ys = [_power(vm, z, t) for z in zs]
            self.record(ys, lam, zs)
        return ys

    def run_B(self, xs: List[Ciphertext]) -> List[Ciphertext]:
        vm, plans = self.vm, self.plans
        k = plans.k
        floor = vm.cfg.bts_floor
        y0 = self.exponentiate(xs, 2.0**-k)
        need = max(k + 1, k + floor) if k > 1 else k + 1
        if y0[0].level < need:
            if y0[0].level < floor or vm.cfg.top_level < need:
                raise OutOfBudgetError(
                    f"version B needs y0 at level {need}; the bootstrap cycle is too short for k={k}"
                )
            y0 = [vm.bootstrap(y) for y in y0]
        l0 = y0[0].level
        lam = None
        prev = y0
        for j in range(1, k + 1):
            plan = plans.steps[j - 1]
            if lam is None:
                lam = self.aux(prev, 2, plan, l0)
            else:
                old = lam
                lam = self.aux(prev, 2, plan, l0, post=lambda c, o=old: vm.mult_ct(c, o),
                               post_levels=1, post_cap=old.level - 1)
            zs = [vm.mult_ct(y, lam) for y in y0]
            ys = zs
            for _ in range(j):
                ys = [vm.mult_ct(y, y) for y in ys]
            self.record(ys, lam, zs)
            prev = ys
        return prev

    def run_naive(self, xs: List[Ciphertext]) -> List[Ciphertext]:
        vm = self.vm
        ys = self.exponentiate(xs, 1.0)
        ys = self.ensure(ys, 1, keep_floor=False)
        lam = self.aux(ys, 1, self.plans.steps[0], ys[0].level,
                       post=lambda c: vm.mult_ct(c, c), post_levels=1)
        out = [vm.mult_ct(y, lam) for y in ys]
        self.record(out, lam)
        return out


def _default_layout(ct: Ciphertext, n: int) -> PackingLayout:
    return PackingLayout.single(ct.n_slots, n)


def run_softmax(cts: List[Ciphertext], params: SoftmaxParams, plans: Optional[SoftmaxPlans] = None,
                layout: Optional[PackingLayout] = None, variant: str = "A",
                state: Optional[NormalizationState] = None) -> List[Ciphertext]:
    """Evaluate Softmax on ``m`` packed ciphertexts sharing one auxiliary thread.

    Args:
        cts: main-thread ciphertexts, packed per ``layout``.
        params: algorithm parameters.
        plans: prebuilt function plans (built and cached if omitted).
        layout: slot layout; defaults to the one-ciphertext layout.
        variant: ``"A"``, ``"B"`` or ``"naive"``.
        state: filled with per-round diagnostics when given.

    Returns:
        The output ciphertexts, in the same layout.
    """
    if not cts:
        raise ValueError("no ciphertexts given")
    vm = cts[0].vm
    n = params.n
    layout = layout or _default_layout(cts[0], n)
    if len(cts) != layout.m:
        raise ValueError(f"layout expects {layout.m} ciphertexts, got {len(cts)}")
    if layout.n != n or layout.N0 != vm.cfg.n_slots:
        raise ValueError("layout does not match the parameters or the VM slot count")
    if variant not in ("A", "B", "naive"):
        raise ValueError(f"unknown variant {variant!r}")
    if n == 1:
        return [vm.add_const(vm.mult_const(c, 0.0), 1.0) for c in cts]
    if plans is None:
        plans = build_plans(params, variant, vm.cfg.exact, vm.cfg.cycle_levels)
    run = _Run(vm, params, plans, layout, state)
    if plans.variant == "naive":
        return run.run_naive(list(cts))
    if variant == "B":
        if params.strategy != "normalize-and-square":
            raise ValueError("version B supports only the normalize-and-square strategy")
        return run.run_B(list(cts))
    return run.run_A(list(cts))


def aux_thread(ct_in: Ciphertext, layout: PackingLayout, invsqrt: FunctionPlan,
               min_level: int = 0, schedule: str = "late") -> Ciphertext:
    """Replicate ``1 / sqrt(sum_i x_i**2)`` of every lane into all its coordinates."""
    vm = ct_in.vm
    params = SoftmaxParams(M=1.0, n=layout.n, bts_schedule=schedule)
    plans = SoftmaxPlans("A", 1, 2, FunctionPlan("exp", (-1.0, 0.0), 0, 0.0), (invsqrt,))
    return _Run(vm, params, plans, layout, None).aux([ct_in], 2, invsqrt, min_level)


def softmax_A(ct: Ciphertext, params: SoftmaxParams, plans: Optional[SoftmaxPlans] = None,
              layout: Optional[PackingLayout] = None, state: Optional[NormalizationState] = None) -> Ciphertext:
    """Normalize-and-square Softmax on a single packed ciphertext."""
    return run_softmax([ct], params, plans, layout, "A", state)[0]


def softmax_B(ct: Ciphertext, params: SoftmaxParams, plans: Optional[SoftmaxPlans] = None,
              layout: Optional[PackingLayout] = None, state: Optional[NormalizationState] = None) -> Ciphertext:
    """Version B: accumulate the normalizer and recompute powers of ``y0``."""
    return run_softmax([ct], params, plans, layout, "B", state)[0]


def softmax_naive(ct: Ciphertext, params: SoftmaxParams, plans: Optional[SoftmaxPlans] = None,
                  layout: Optional[PackingLayout] = None, state: Optional[NormalizationState] = None) -> Ciphertext:
    """Exponentiate on ``[-M, 0]``, then multiply by the inverse of the sum."""
    return run_softmax([ct], params, plans, layout, "naive", state)[0]
