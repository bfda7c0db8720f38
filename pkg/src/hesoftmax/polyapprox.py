"""Polynomial approximations of exp and of inverse (square) roots.

Everything is represented in the Chebyshev basis of the design interval.
Fits are produced by interpolation, by a (optionally weighted) Remez
exchange, or by Taylor expansion, and every returned polynomial carries an
error measured on a dense grid.

Weighted fits approximate ``x**-s`` under the relative metric
``sup |P(x) * x**s - 1|``; ``s = 1/2`` is the inverse square root.
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import DomainError, InfeasibleError, OutOfBudgetError
from .slotvm import Ciphertext, SlotVM, VmConfig

MIN_WIDTH = 2.0**-30
MAX_T = 14


def _target_fn(target: str, power: float) -> Callable[[np.ndarray], np.ndarray]:
    if target == "exp":
        return np.exp
    if target in ("invsqrt", "rootinv"):
        return lambda x: np.power(x, -power)
    raise ValueError(f"unknown target {target!r}")


@dataclass(frozen=True)
class ApproxSpec:
    """What to approximate.

    Attributes:
        target: ``"exp"`` or ``"invsqrt"``. ``"rootinv"`` is the
            generalisation ``x**-power``.
        interval: design domain ``(a, b)``.
        target_bits: requested accuracy, ``-log2`` of the error.
        weighted: measure ``|P(x) x**power - 1|`` instead of ``|P - f|``.
        power: exponent for the inverse-root targets.
    """

    target: str
    interval: tuple
    target_bits: float = 10.0
    weighted: bool = False
    power: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))
        if self.target_bits < 1:
            raise ValueError("target_bits must be >= 1")
        if self.target in ("invsqrt", "rootinv") and self.interval[0] <= 0:
            raise DomainError("inverse roots need a strictly positive interval")
        if self.target == "invsqrt" and self.power != 0.5:
            object.__setattr__(self, "target", "rootinv")

    def fn(self) -> Callable[[np.ndarray], np.ndarray]:
        return _target_fn(self.target, self.power)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """A Chebyshev series on ``interval`` with its measured error.

    ``verified_err`` is absolute error for unweighted fits and
    ``sup |P(x) x**power - 1|`` for weighted ones. ``bound`` holds an
    analytic error bound when one is known (Taylor fits).
    """

    coeffs: np.ndarray
    interval: tuple
    verified_err: float
    weighted: bool = False
    target: Optional[str] = None
    power: float = 0.5
    converged: bool = True
    bound: Optional[float] = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        a, b = self.interval
        if not a < b:
            raise DomainError(f"empty interval [{a}, {b}]")
        if not self.verified_err >= 0:
            raise ValueError("verified_err must be a non-negative measurement")

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def depth(self) -> int:
        return math.ceil(math.log2(self.degree + 1)) if self.degree > 0 else 0

    def __call__(self, x):
        a, b = self.interval
        return C.chebval((2.0 * np.asarray(x, dtype=np.float64) - a - b) / (b - a), self.coeffs)

    def error_on(self, x: np.ndarray, fn: Optional[Callable] = None) -> np.ndarray:
        """Pointwise error (weighted if this is a weighted fit)."""
        fn = fn or _target_fn(self.target, self.power)
        if self.weighted:
            return self(x) * np.power(x, self.power) - 1.0
        return self(x) - fn(x)

    def remeasure(self, fn: Optional[Callable] = None) -> float:
        grid = verification_grid(self.interval, self.degree)
        return float(np.max(np.abs(self.error_on(grid, fn))))

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": "chebyshev",
                "interval": list(self.interval),
                "coeffs": self.coeffs.tolist(),
                "verified_err": self.verified_err,
                "weighted": self.weighted,
                "target": self.target,
                "power": self.power,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        d = json.loads(text)
        if d.get("basis", "chebyshev") != "chebyshev":
            raise ValueError(f"unsupported basis {d['basis']!r}")
        return cls(
            coeffs=np.array(d["coeffs"]),
            interval=tuple(d["interval"]),
            verified_err=d["verified_err"],
            weighted=d["weighted"],
            target=d.get("target"),
            power=d.get("power", 0.5),
        )


def verification_grid(interval, degree: int) -> np.ndarray:
    """Dense grid used for every error measurement.

    Chebyshev-distributed points (dense near the ends, where weighted
    errors peak) merged with a uniform grid and the endpoints.
    """
    a, b = interval
    n_cheb = max(4096, 16 * (degree + 1))
    t = np.cos(np.pi * (np.arange(n_cheb) + 0.5) / n_cheb)
    cheb = 0.5 * (a + b) + 0.5 * (b - a) * t
    return np.unique(np.concatenate([cheb, np.linspace(a, b, 2048)]))


def _check_interval(interval) -> tuple:
    a, b = float(interval[0]), float(interval[1])
    if not b - a >= MIN_WIDTH:
        raise DomainError(f"degenerate interval [{a}, {b}]")
    return a, b


def _finish(coeffs, interval, fn, weighted, target, power, **kw) -> Polynomial:
    proto = Polynomial(coeffs, interval, 0.0, weighted, target, power)
    err = proto.remeasure(fn)
    return Polynomial(coeffs, interval, err, weighted, target, power, **kw)


def chebyshev_interpolant(target, interval, degree: int, weighted: bool = False, power: float = 0.5) -> Polynomial:
    """Interpolate at the ``degree + 1`` Chebyshev points of the second kind.

    Args:
        target: a name understood by :class:`ApproxSpec` or a callable.
        interval: ``(a, b)``.
        degree: polynomial degree (``>= 0``).
        weighted: report the relative error ``|P x**power - 1|``.
        power: exponent of the inverse-root target (weighted fits only).
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    a, b = _check_interval(interval)
    if callable(target):
        fn, name = target, None
    else:
        fn, name = _target_fn(target, power), target
    if degree == 0:
        t = np.array([0.0])
    else:
        t = np.cos(np.pi * np.arange(degree + 1) / degree)
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    with np.errstate(all="ignore"):
        y = np.asarray(fn(x), dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("target is not finite on the interval")
    coeffs = C.chebfit(t, y, degree)
    return _finish(coeffs, (a, b), fn, weighted, name, power)


class _Remez:
    """Exchange algorithm for ``min sup |w (P - f)|`` in the Chebyshev basis."""

    def __init__(self, fn, interval, degree, weight):
        self.fn, self.weight = fn, weight
        self.a, self.b = interval
        self.d = degree
        n_ref = degree + 2
        g = max(4096, 64 * (n_ref + 2))
        self.t = np.cos(np.pi * np.arange(g - 1, -1, -1) / (g - 1))
        self.x = self._x(self.t)
        self.f = fn(self.x)
        self.w = weight(self.x)
        self.V = None

    def _x(self, t):
        return 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * t

    def solve(self, ref):
        x = self._x(ref)
        n = ref.size
        A = np.empty((n, n))
        A[:, :-1] = C.chebvander(ref, self.d)
        A[:, -1] = (-1.0) ** np.arange(n) / self.weight(x)
        sol = np.linalg.solve(A, self.fn(x))
        return sol[:-1], abs(sol[-1])

    def error(self, coeffs, t):
        x = self._x(t)
        return self.weight(x) * (C.chebval(t, coeffs) - self.fn(x))

    def extrema(self, coeffs):
        e = self.weight(self.x) * (C.chebval(self.t, coeffs) - self.f)
        sign = np.sign(e)
        sign[sign == 0] = 1
        cuts = np.flatnonzero(np.diff(sign)) + 1
        starts = np.concatenate([[0], cuts])
        ends = np.concatenate([cuts, [e.size]])
        idx = np.array([s + np.argmax(np.abs(e[s:t])) for s, t in zip(starts, ends)])
        idx = self._trim(list(idx), e)
        pts = self._refine(np.array(idx), e)
        return pts, e

    def _trim(self, idx, e):
        n_ref = self.d + 2
        while len(idx) > n_ref:
            if len(idx) == n_ref + 1:
                drop = 0 if abs(e[idx[0]]) < abs(e[idx[-1]]) else len(idx) - 1
                idx.pop(drop)
                continue
            k = int(np.argmin([abs(e[i]) for i in idx]))
            idx.pop(k)
            merged = [idx[0]]
            for i in idx[1:]:
                if np.sign(e[i]) == np.sign(e[merged[-1]]):
                    if abs(e[i]) > abs(e[merged[-1]]):
                        merged[-1] = i
                else:
                    merged.append(i)
            idx = merged
        return idx

    def _refine(self, idx, e):
        """Parabolic vertex through each grid extremum and its neighbours."""
        t = self.t[idx].copy()
        inner = (idx > 0) & (idx < self.t.size - 1)
        i = idx[inner]
        t0, t1, t2 = self.t[i - 1], self.t[i], self.t[i + 1]
        y0, y1, y2 = np.abs(e[i - 1]), np.abs(e[i]), np.abs(e[i + 1])
        num = (t1 - t0) ** 2 * (y1 - y2) - (t1 - t2) ** 2 * (y1 - y0)
        den = (t1 - t0) * (y1 - y2) - (t1 - t2) * (y1 - y0)
        with np.errstate(all="ignore"):
            vert = t1 - 0.5 * num / den
        ok = np.isfinite(vert) & (vert > t0) & (vert < t2)
        t[np.flatnonzero(inner)[ok]] = vert[ok]
        return t

    def run(self, max_iter=100, tol=1e-4):
        n_ref = self.d + 2
        ref = -np.cos(np.pi * np.arange(n_ref) / (n_ref - 1))
        best = None
        spread = np.inf
        for _ in range(max_iter):
            try:
                coeffs, _ = self.solve(ref)
            except np.linalg.LinAlgError:
                break
            pts, e = self.extrema(coeffs)
            sup = float(np.max(np.abs(e)))
            if best is None or sup < best[1]:
                best = (coeffs, sup)
            if pts.size < n_ref:
                break
            vals = np.abs(self.error(coeffs, pts))
            spread = (vals.max() - vals.min()) / vals.max()
            if spread < tol:
                break
            ref = pts
        if best is None:
            return None, np.inf, np.inf
        return best[0], best[1], spread


def remez_minimax(spec: ApproxSpec, degree: int, max_iter: int = 100) -> Polynomial:
    """Minimax fit by exchange, never worse than the Chebyshev interpolant.

    When the alternation spread does not fall below 5% within ``max_iter``
    iterations the result is flagged ``converged=False`` and a warning is
    issued; the better of the last exchange iterate and the interpolant is
    returned.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return _remez_cached(spec.target, _check_interval(spec.interval), int(degree), spec.weighted, spec.power, max_iter)


@functools.lru_cache(maxsize=512)
def _remez_cached(target, interval, degree, weighted, power, max_iter) -> Polynomial:
    fn = _target_fn(target, power)
    if weighted:
        weight = lambda x: np.power(x, power)
    else:
        weight = lambda x: np.ones_like(x)
    with np.errstate(all="ignore"):
        coeffs, _, spread = _Remez(fn, interval, degree, weight).run(max_iter)
    interp = chebyshev_interpolant(target, interval, degree, weighted, power)
    if coeffs is None:
        warnings.warn(f"Remez exchange failed at degree {degree}; using interpolant", RuntimeWarning)
        return interp
    poly = _finish(coeffs, interval, fn, weighted, target, power)
    # at double-precision noise level the alternation test is meaningless
    converged = spread < 0.05 or poly.verified_err < 1e-13
    poly = Polynomial(poly.coeffs, interval, poly.verified_err, weighted, target, power, converged=converged)
    if not converged:
        warnings.warn(
            f"Remez exchange did not equioscillate within 5% (spread {spread:.3g}) at degree {degree}",
            RuntimeWarning,
        )
    if interp.verified_err < poly.verified_err:
        return Polynomial(interp.coeffs, interval, interp.verified_err, weighted, target, power, converged=False)
    return poly


def fit_to_bits(spec: ApproxSpec, max_t: int = MAX_T, strict: bool = True) -> Polynomial:
    """Smallest degree ``2**t - 1`` whose minimax fit reaches ``target_bits``.

    Args:
        spec: what to approximate.
        max_t: largest ``t`` to try.
        strict: if false, return the ``max_t`` fit even when it misses the
            target instead of raising.

    Raises:
        InfeasibleError: no ``t <= max_t`` meets the target (strict mode).
    """
    _check_interval(spec.interval)
    goal = 2.0**-spec.target_bits
    poly = None
    for t in range(1, min(max_t, MAX_T) + 1):
        poly = remez_minimax(spec, 2**t - 1)
        if poly.verified_err <= goal:
            return poly
    if strict or poly is None:
        raise InfeasibleError(
            f"{spec.target} on {spec.interval} needs degree beyond 2^{min(max_t, MAX_T)} - 1 "
            f"for {spec.target_bits} bits"
        )
    return poly


def taylor_exp(degree: int, A: float = 1.0) -> Polynomial:
    """Degree-``d`` Taylor polynomial of exp at 0, on ``[-A, 0]``.

    ``bound`` is the truncation bound ``A**(d+1) / (d+1)!``.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if A <= 0:
        raise DomainError("A must be positive")
    mono = np.array([1.0 / math.factorial(i) for i in range(degree + 1)])
    series = np.polynomial.Polynomial(mono).convert(kind=np.polynomial.Chebyshev, domain=[-A, 0.0])
    coeffs = np.zeros(degree + 1)
    coeffs[: series.coef.size] = series.coef
    bound = A ** (degree + 1) / math.factorial(degree + 1)
    return _finish(coeffs, (-A, 0.0), np.exp, False, "exp", 0.5, bound=bound)


def newton_invsqrt(x_ct: Ciphertext, y0: Union[Polynomial, Ciphertext], iters: int, active=None) -> Ciphertext:
    """Refine an inverse square root estimate with ``y <- y (3 - x y^2) / 2``.

    Each step computes ``(x/2) y``, ``y^2`` and ``(3/2) y`` in parallel and
    returns ``(3/2) y - ((x/2) y) y^2``: two levels, three ciphertext
    products and one scalar product per iteration.
    """
    vm = x_ct.vm
    y = vm.eval_poly(x_ct, y0, active) if isinstance(y0, Polynomial) else y0
    if iters <= 0:
        return y
    if min(x_ct.level, y.level) < 2 * iters:
        raise OutOfBudgetError(
            f"{iters} Newton steps need {2 * iters} levels; operands are at ({x_ct.level}, {y.level})"
        )
    half_x = vm.mult_const(x_ct, 0.5)
    for _ in range(iters):
        z1 = vm.mult_ct(half_x, y)
        z2 = vm.mult_ct(y, y)
        z3 = vm.mult_const(y, 1.5)
        y = vm.sub(z3, vm.mult_ct(z1, z2))
    return y


def newton_float(x: np.ndarray, y: np.ndarray, iters: int) -> np.ndarray:
    for _ in range(iters):
        y = y * (3.0 - x * y * y) / 2.0
    return y


@dataclass(frozen=True, eq=False)
class InvSqrtPlan:
    """Seed polynomial plus Newton steps.

    Attributes:
        seed: initial minimax approximation (weighted).
        iters: Newton steps applied after the seed.
        depth: total levels consumed.
        mults: ciphertext-ciphertext products used.
        verified_err: ``sup |y sqrt(x) - 1|`` of the whole plan on the grid.
        seed_suffices: the seed alone already meets the target.
    """

    seed: Polynomial
    iters: int
    depth: int
    mults: int
    verified_err: float
    seed_suffices: bool = False

    @property
    def interval(self) -> tuple:
        return self.seed.interval

    def evaluate(self, x_ct: Ciphertext, active=None) -> Ciphertext:
        return newton_invsqrt(x_ct, self.seed, self.iters, active)


def count_mults(poly: Polynomial, iters: int = 0) -> int:
    """Ciphertext products used to evaluate ``poly`` and ``iters`` Newton steps."""
    vm = SlotVM(VmConfig.leveled(1, depth=poly.depth + 2 * iters + 1, exact=True))
    mid = 0.5 * (poly.interval[0] + poly.interval[1])
    newton_invsqrt(vm.encode([mid]), poly, iters)
    return vm.ledger.mult_ct_ct


def design_invsqrt(interval, target_bits: float, budget_mode: str = "minimax-only") -> InvSqrtPlan:
    """Plan an inverse square root on ``interval`` to ``target_bits``.

    ``minimax-only`` fits one polynomial; ``newton-hybrid`` fits a 3-bit
    seed and appends ``ceil(log2(target_bits / 3)) + 1`` Newton steps.
    """
    if budget_mode == "minimax-only":
        seed = fit_to_bits(ApproxSpec("invsqrt", interval, target_bits, weighted=True))
        iters = 0
    elif budget_mode == "newton-hybrid":
        seed = fit_to_bits(ApproxSpec("invsqrt", interval, 3.0, weighted=True))
        iters = max(1, math.ceil(math.log2(target_bits / 3.0)) + 1)
    else:
        raise ValueError(f"unknown budget mode {budget_mode!r}")
    grid = verification_grid(seed.interval, seed.degree)
    y = newton_float(grid, seed(grid), iters)
    err = float(np.max(np.abs(y * np.sqrt(grid) - 1.0)))
    return InvSqrtPlan(
        seed=seed,
        iters=iters,
        depth=seed.depth + 2 * iters,
        mults=count_mults(seed, iters),
        verified_err=err,
        seed_suffices=seed.verified_err <= 2.0**-target_bits,
    )
