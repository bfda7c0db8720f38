"""A deterministic stand-in for CKKS arithmetic.

Ciphertexts are plain slot vectors carrying a multiplicative level. Every
non-addition operation rounds to the fixed-point grid ``2**-p`` (half-even),
bootstrapping restores the level budget and injects uniform noise of
magnitude ``2**-p_bts``, and a :class:`CostLedger` counts what a real
implementation would pay for.

Level attribution follows the descent of each thread's *frontier*: the
lowest level reached by that thread since its last bootstrap. An operation
charges its thread only for the levels it takes the frontier below where it
already was, so two independent chains that run side by side (the ``m``
main-thread ciphertexts of a batched Softmax, or the repeated squaring
chains that restart from ``y0`` in version B) are charged once.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, FixedPointOverflowError, OutOfBudgetError

THREADS = ("main", "aux")


@dataclass(frozen=True)
class VmConfig:
    """Parameters of the simulated CKKS instance.

    ``p_bts=None`` (or ``inf``) disables bootstrap noise. ``exact=True``
    turns off every rounding and noise source so the model reduces to plain
    float64 arithmetic with level bookkeeping.
    """

    n_slots: int = 2**15
    p: int = 29
    p_bts: Optional[float] = 22
    top_level: int = 9
    bts_floor: int = 0
    exact: bool = False
    seed: int = 0
    rotation_jitter: bool = False
    overflow_bound: float = 2.0**34
    domain_guard: float = 0.01

    def __post_init__(self):
        n = self.n_slots
        if n < 1 or n & (n - 1):
            raise ValueError(f"n_slots must be a power of two, got {n}")
        if self.p < 2:
            raise ValueError(f"p must be at least 2, got {self.p}")
        if self.p_bts is not None and self.p_bts <= 0:
            raise ValueError("p_bts must be positive")
        if self.top_level < 1:
            raise ValueError("top_level must be >= 1")
        if not 0 <= self.bts_floor < self.top_level:
            raise ValueError("bts_floor must satisfy 0 <= bts_floor < top_level")

    @classmethod
    def fgb(cls, n_slots: int = 2**15, **kw) -> "VmConfig":
        """HEaaN FGb-like preset: levels 12..3 usable between bootstraps.

        Nine levels are available per bootstrap cycle, and a ciphertext that
        will not be bootstrapped again may descend to level 0.
        """
        kw.setdefault("p", 29)
        kw.setdefault("p_bts", 22)
        return cls(n_slots=n_slots, top_level=12, bts_floor=3, **kw)

    @classmethod
    def leveled(cls, n_slots: int, p: int = 40, depth: int = 200, **kw) -> "VmConfig":
        """Deep budget so that no bootstrap ever fires."""
        kw.setdefault("p_bts", None)
        return cls(n_slots=n_slots, p=p, top_level=depth, **kw)

    @property
    def epsilon(self) -> float:
        return 2.0**-self.p

    @property
    def cycle_levels(self) -> int:
        """Levels usable between two bootstraps."""
        return self.top_level - self.bts_floor

    @property
    def bts_noise(self) -> float:
        if self.exact or self.p_bts is None or math.isinf(self.p_bts):
            return 0.0
        return 2.0**-self.p_bts


@dataclass
class CostLedger:
    mult_ct_ct: int = 0
    mult_pt_ct: int = 0
    rotations: int = 0
    additions: int = 0
    bootstraps: int = 0
    levels_consumed_main: int = 0
    levels_consumed_aux: int = 0
    bootstraps_main: int = 0
    bootstraps_aux: int = 0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def copy(self) -> "CostLedger":
        return CostLedger(**self.to_dict())

    def __add__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(**{k: v + getattr(other, k) for k, v in self.to_dict().items()})

    def __sub__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(**{k: v - getattr(other, k) for k, v in self.to_dict().items()})


@dataclass(frozen=True, eq=False)
class Ciphertext:
    slots: np.ndarray
    level: int
    tag: str
    vm: "SlotVM" = field(repr=False)

    @property
    def n_slots(self) -> int:
        return self.slots.shape[0]

    def decode(self) -> np.ndarray:
        return self.slots.copy()


class SlotVM:
    """One evaluation context: configuration, cost ledger and noise source.

    A context is single-owner. Independent contexts may run concurrently;
    their ledgers combine with ``+``.
    """

    def __init__(self, cfg: VmConfig, record: bool = False):
        self.cfg = cfg
        self.ledger = CostLedger()
        self.rng = np.random.default_rng(cfg.seed)
        self._frontier = {t: cfg.top_level for t in THREADS}
        self._scale = float(2**cfg.p)
        # (op, tag, charged levels) per level-consuming op when recording
        self.events: Optional[list] = [] if record else None

    # -- internals -----------------------------------------------------

    def _round(self, v: np.ndarray) -> np.ndarray:
        if self.cfg.exact:
            return v
        return np.rint(v * self._scale) / self._scale

    def _check(self, v: np.ndarray) -> np.ndarray:
        bound = self.cfg.overflow_bound
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) >= bound):
            raise FixedPointOverflowError(
                f"slot magnitude reached {np.nanmax(np.abs(v)):.3g} (bound {bound:.3g})"
            )
        v.setflags(write=False)
        return v

    def _new(self, slots: np.ndarray, level: int, tag: str) -> Ciphertext:
        return Ciphertext(self._check(slots), int(level), tag, self)

    def _charge(self, op: str, tag: str, in_levels: Iterable[int], out_level: int) -> None:
        if tag not in self._frontier:
            raise ValueError(f"unknown thread tag {tag!r}")
        start = min(self._frontier[tag], min(in_levels))
        drop = max(0, start - out_level)
        self._frontier[tag] = min(self._frontier[tag], out_level)
        if tag == "main":
            self.ledger.levels_consumed_main += drop
        else:
            self.ledger.levels_consumed_aux += drop
        if self.events is not None:
            self.events.append((op, tag, drop))

    def _same_vm(self, *cts: Ciphertext) -> None:
        for ct in cts:
            if ct.vm is not self:
                raise ValueError("ciphertext belongs to a different evaluation context")

    # -- encoding ------------------------------------------------------

    def encode(self, values: Sequence[float], level: Optional[int] = None, tag: str = "main") -> Ciphertext:
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size > self.cfg.n_slots:
            raise ValueError(f"{v.size} values do not fit in {self.cfg.n_slots} slots")
        level = self.cfg.top_level if level is None else int(level)
        if not 0 <= level <= self.cfg.top_level:
            raise ValueError(f"level {level} outside [0, {self.cfg.top_level}]")
        if v.size and np.max(np.abs(v)) >= self.cfg.overflow_bound:
            raise FixedPointOverflowError("value exceeds the fixed-point range")
        slots = np.zeros(self.cfg.n_slots)
        slots[: v.size] = v
        return self._new(self._round(slots), level, tag)

    def decode(self, ct: Ciphertext) -> np.ndarray:
        return ct.decode()

    def retag(self, ct: Ciphertext, tag: str) -> Ciphertext:
        """Hand a ciphertext over to another thread (free)."""
        return Ciphertext(ct.slots, ct.level, tag, self)

    # -- additive ops (error free) -------------------------------------

    def add(self, a: Ciphertext, b: Ciphertext, tag: Optional[str] = None) -> Ciphertext:
        self._same_vm(a, b)
        self.ledger.additions += 1
        return self._new(a.slots + b.slots, min(a.level, b.level), tag or a.tag)

    def sub(self, a: Ciphertext, b: Ciphertext, tag: Optional[str] = None) -> Ciphertext:
        self._same_vm(a, b)
        self.ledger.additions += 1
        return self._new(a.slots - b.slots, min(a.level, b.level), tag or a.tag)

    def add_const(self, a: Ciphertext, c: float) -> Ciphertext:
        self.ledger.additions += 1
        c = float(self._round(np.array([c]))[0])
        return self._new(a.slots + c, a.level, a.tag)

    # -- multiplicative ops --------------------------------------------

    def mult_ct(self, a: Ciphertext, b: Ciphertext, tag: Optional[str] = None) -> Ciphertext:
        self._same_vm(a, b)
        tag = tag or a.tag
        level = min(a.level, b.level) - 1
        if level < 0:
            raise OutOfBudgetError(
                f"ct-ct multiplication at levels ({a.level}, {b.level}); bootstrap required"
            )
        self.ledger.mult_ct_ct += 1
        self._charge("mult_ct", tag, (a.level, b.level), level)
        return self._new(self._round(a.slots * b.slots), level, tag)

    def mult_pt(self, a: Ciphertext, plain: Sequence[float], tag: Optional[str] = None) -> Ciphertext:
        tag = tag or a.tag
        if a.level < 1:
            raise OutOfBudgetError("pt-ct multiplication at level 0; bootstrap required")
        pt = np.zeros(self.cfg.n_slots)
        p = np.asarray(plain, dtype=np.float64).ravel()
        if p.size == 1:
            pt[:] = p[0]
        else:
            pt[: p.size] = p
        pt = self._round(pt)
        self.ledger.mult_pt_ct += 1
        self._charge("mult_pt", tag, (a.level,), a.level - 1)
        return self._new(self._round(a.slots * pt), a.level - 1, tag)

    def mult_const(self, a: Ciphertext, c: float) -> Ciphertext:
        """Scalar multiplication.

        Scalar constants are absorbed into the scale of the next rescale, so
        in this model they round to the grid but keep the level.
        """
        self.ledger.mult_pt_ct += 1
        return self._new(self._round(a.slots * float(c)), a.level, a.tag)

    def neg(self, a: Ciphertext) -> Ciphertext:
        return self._new(-a.slots, a.level, a.tag)

    # -- data movement -------------------------------------------------

    def rotate(self, a: Ciphertext, i: int) -> Ciphertext:
        """Cyclic left shift: slot ``j`` of the result holds slot ``j + i``."""
        self.ledger.rotations += 1
        out = np.roll(a.slots, -(int(i) % self.cfg.n_slots))
        if self.cfg.rotation_jitter and not self.cfg.exact:
            eps = self.cfg.epsilon
            out = out + self.rng.uniform(-eps, eps, size=out.shape)
        return self._new(self._round(out), a.level, a.tag)

    def level_down(self, a: Ciphertext, level: int) -> Ciphertext:
        """Drop to a lower level without touching the values (modulus switch)."""
        if level > a.level:
            raise ValueError(f"cannot raise level {a.level} to {level} without bootstrapping")
        if level < 0:
            raise OutOfBudgetError("level would become negative")
        if level < a.level:
            self._charge("level_down", a.tag, (a.level,), level)
        return Ciphertext(a.slots, int(level), a.tag, self)

    def bootstrap(self, a: Ciphertext, tag: Optional[str] = None) -> Ciphertext:
        tag = tag or a.tag
        if a.level < self.cfg.bts_floor:
            raise OutOfBudgetError(
                f"bootstrap needs level >= {self.cfg.bts_floor}, ciphertext is at {a.level}"
            )
        noise = self.cfg.bts_noise
        out = a.slots
        if noise:
            out = out + self.rng.uniform(-noise, noise, size=out.shape)
        self.ledger.bootstraps += 1
        if tag == "main":
            self.ledger.bootstraps_main += 1
        else:
            self.ledger.bootstraps_aux += 1
        self._frontier[tag] = self.cfg.top_level
        return self._new(self._round(out), self.cfg.top_level, tag)

    def map_exact(self, a: Ciphertext, fn, depth: int, active: Optional[np.ndarray] = None) -> Ciphertext:
        """Apply ``fn`` slot-wise as if by a perfect circuit of ``depth`` levels.

        Stands in for an approximation whose own error is negligible, so the
        remaining error is fixed-point rounding alone. Slots outside
        ``active`` come out as zero.
        """
        if a.level < depth:
            raise OutOfBudgetError(f"function of depth {depth} needs {depth} levels, ciphertext has {a.level}")
        v = np.zeros_like(a.slots)
        sel = slice(None) if active is None else active
        with np.errstate(all="ignore"):
            v[sel] = fn(a.slots[sel])
        out = self.level_down(a, a.level - depth)
        return self._new(self._round(v), out.level, a.tag)

    # -- polynomial evaluation -----------------------------------------

    def check_domain(self, a: Ciphertext, interval, active: Optional[np.ndarray] = None, what: str = "input"):
        lo, hi = interval
        guard = self.cfg.domain_guard * (hi - lo)
        v = a.slots if active is None else a.slots[active]
        if v.size == 0:
            return
        vmin, vmax = float(v.min()), float(v.max())
        if vmin < lo - guard or vmax > hi + guard:
            raise DomainError(
                f"{what} range [{vmin:.6g}, {vmax:.6g}] leaves design interval [{lo:.6g}, {hi:.6g}]"
            )

    def eval_poly(self, a: Ciphertext, poly, active: Optional[np.ndarray] = None) -> Ciphertext:
        """Evaluate a Chebyshev-basis polynomial slot-wise.

        Baby-step/giant-step splitting in the Chebyshev basis: the output sits
        exactly ``ceil(log2(d + 1))`` levels below the input.
        """
        coeffs = np.asarray(poly.coeffs, dtype=np.float64)
        d = coeffs.size - 1
        depth = math.ceil(math.log2(d + 1)) if d > 0 else 0
        if a.level < depth:
            raise OutOfBudgetError(
                f"degree-{d} polynomial needs {depth} levels, ciphertext has {a.level}"
            )
        self.check_domain(a, poly.interval, active)
        out = _ChebyshevEvaluator(self, a, poly.interval, depth).run(coeffs)
        return self.level_down(out, a.level - depth)


class _ChebyshevEvaluator:
    def __init__(self, vm: SlotVM, a: Ciphertext, interval, depth: int):
        self.vm = vm
        lo, hi = interval
        t1 = vm.add_const(vm.mult_const(a, 2.0 / (hi - lo)), -(hi + lo) / (hi - lo))
        self.depth = depth
        self.baby_log = max(1, math.ceil(depth / 2))
        self.T = {1: t1}

    def power(self, i: int) -> Ciphertext:
        """T_i with depth ceil(log2 i)."""
        if i in self.T:
            return self.T[i]
        vm = self.vm
        half = 1 << (math.ceil(math.log2(i)) - 1)
        if i == 2 * half:
            t = self.power(half)
            out = vm.add_const(vm.mult_const(vm.mult_ct(t, t), 2.0), -1.0)
        else:
            prod = vm.mult_const(vm.mult_ct(self.power(half), self.power(i - half)), 2.0)
            rest = 2 * half - i
            out = vm.sub(prod, self.power(rest)) if rest else vm.add_const(prod, -1.0)
        self.T[i] = out
        return out

    def leaf(self, c: np.ndarray) -> Ciphertext:
        vm = self.vm
        acc = None
        for i in range(1, c.size):
            if c[i] == 0.0:
                continue
            term = vm.mult_const(self.power(i), c[i])
            acc = term if acc is None else vm.add(acc, term)
        if acc is None:
            acc = vm.mult_const(self.T[1], 0.0)
        return vm.add_const(acc, c[0]) if c.size and c[0] != 0.0 else acc

    def run(self, c: np.ndarray, m: Optional[int] = None) -> Ciphertext:
        m = self.depth if m is None else m
        if m <= self.baby_log:
            return self.leaf(c)
        s = 1 << (m - 1)
        if c.size <= s:
            return self.run(c, m - 1)
        # c = q * T_s + r  using  T_j T_s = (T_{s+j} + T_{s-j}) / 2
        hi = np.zeros(s)
        hi[: c.size - s] = c[s:]
        q = 2.0 * hi
        q[0] = hi[0]
        r = c[:s].copy()
        r[1:] -= q[:0:-1] / 2.0
        prod = self.vm.mult_ct(self.run(q, m - 1), self.power(s))
        return self.vm.add(prod, self.run(r, m - 1))


# Functional aliases over the owning context of the first operand.

def encode(values, cfg: VmConfig, level: Optional[int] = None, tag: str = "main") -> Ciphertext:
    return SlotVM(cfg).encode(values, level, tag)


def add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return a.vm.add(a, b)


def mult_ct(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return a.vm.mult_ct(a, b)


def mult_pt(a: Ciphertext, plain) -> Ciphertext:
    return a.vm.mult_pt(a, plain)


def rotate(a: Ciphertext, i: int) -> Ciphertext:
    return a.vm.rotate(a, i)


def bootstrap(a: Ciphertext) -> Ciphertext:
    return a.vm.bootstrap(a)


def eval_poly(a: Ciphertext, poly, active=None) -> Ciphertext:
    return a.vm.eval_poly(a, poly, active)
