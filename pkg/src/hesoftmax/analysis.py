"""Error bounds, heuristic estimates, error metrics and input sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# constants of the fixed-point error analysis
GROWTH = 2.08  # per-round amplification is GROWTH * sqrt(n)
STEP_ERR = 3.036  # fresh error per round, in units of epsilon
BOUND_FACTOR = 2.9
SUM_FACTOR = 15.5
C_CONST = 1.0158
C_PRIME = 1.0006
LAMBDA_FACTOR = 1.018
Z_MAX = 1.017

CSV_COLUMNS = (
    "seed", "n", "M", "k", "p", "p_bts", "algo",
    "err_abs_bits", "err_rel_bits", "levels_main", "levels_aux",
    "ct_mults", "rotations", "bootstraps",
)


@dataclass(frozen=True)
class ErrorBound:
    """Closed-form fixed-point error bound and its ingredients.

    Attributes:
        n, k, epsilon: the instance.
        bound: ``2.9 ((2.08 sqrt n)^k (n+1) + 15.5 n^2) epsilon``.
        a_seq: ``A_0 .. A_k`` from ``A_{j+1} = 2.08 sqrt(n) A_j + 3.036 eps``.
        a_closed: ``2.9 (2.08 sqrt n)^k epsilon``.
        hypothesis: ``max(n^2, 2.9 (2.08 sqrt n)^k) epsilon <= 1/1000``.
    """

    n: int
    k: int
    epsilon: float
    bound: float
    a_seq: tuple
    a_closed: float
    hypothesis: bool

    @property
    def a_k(self) -> float:
        return self.a_seq[-1]

    @property
    def recurrence_within_closed_form(self) -> bool:
        return all(
            a <= BOUND_FACTOR * (GROWTH * math.sqrt(self.n)) ** j * self.epsilon * (1 + 1e-12)
            for j, a in enumerate(self.a_seq)
        )

    @property
    def marker(self) -> str:
        return "hypothesis holds" if self.hypothesis else "hypothesis violated"


def theorem_bound(n: int, k: int, p: float) -> ErrorBound:
    """Worst-case absolute error of the fixed-point loop with ``epsilon = 2**-p``.

    The bound is returned even when its hypothesis fails; check
    :attr:`ErrorBound.hypothesis` before relying on it. The recurrence stays
    below its closed form for ``n >= 2``.
    """
    eps = 2.0**-p
    g = GROWTH * math.sqrt(n)
    a = [eps]
    for _ in range(k):
        a.append(g * a[-1] + STEP_ERR * eps)
    bound = BOUND_FACTOR * (g**k * (n + 1) + SUM_FACTOR * n * n) * eps
    hyp = max(n * n, BOUND_FACTOR * g**k) * eps <= 1e-3
    return ErrorBound(n, k, eps, bound, tuple(a), BOUND_FACTOR * g**k * eps, hyp)


def heuristic_loss_bits(k: int, n: int) -> float:
    """Typical bits lost by the loop: ``k + 1.5 log2 n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return k + 1.5 * math.log2(n)


def heuristic_B_bound(k: int, n: int) -> float:
    """Upper bound ``n 2^k`` of the error amplification factor ``B``."""
    return float(n) * 2.0**k


@dataclass(frozen=True)
class AmplificationFactor:
    value: float
    bound: float
    index: int

    @property
    def within(self) -> bool:
        return self.value <= self.bound * (1 + 1e-12)


def heuristic_B(x, k: int, trace: Optional[tuple] = None) -> AmplificationFactor:
    """Error amplification ``B = 2^k prod_j lambda_j^2 y_i^(j-1)`` at the largest input.

    Args:
        x: one input vector.
        k: number of rounds.
        trace: ``(lambdas, ys)`` with ``lambdas[j-1] = lambda_j`` and
            ``ys[j] = y^(j)`` for ``j = 0..k-1``. When omitted it is
            recomputed in float64 from ``y^(0) = exp(x / 2^k)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if trace is None:
        y = np.exp(x / 2.0**k)
        lambdas, ys = [], []
        for _ in range(k):
            ys.append(y)
            lam = 1.0 / math.sqrt(float(np.sum(y * y)))
            lambdas.append(lam)
            y = (lam * y) ** 2
    else:
        lambdas, ys = trace
        if len(lambdas) < k or len(ys) < k:
            raise ValueError("trace is shorter than k rounds")
    i = int(np.argmax(x))
    value = 2.0**k
    for j in range(k):
        value *= lambdas[j] ** 2 * ys[j][i]
    return AmplificationFactor(float(value), heuristic_B_bound(k, n), i)


def hetal_level_estimate(M: float, n: int, m: int = 1) -> dict:
    """Analytical level counts for a max-subtraction Softmax, leading terms only."""
    if M < 2 or n < 2:
        raise ValueError("M and n must be >= 2")
    return {
        "single": math.log2(M) * math.log2(n),
        "amortized": 4.0 * math.log2(M),
        "label": "analytical estimate, leading term only (1 + o(1) factor dropped); not executed",
    }


@dataclass
class TrialResult:
    """Errors and costs of one trial.

    ``err_abs`` is the largest ``||out - ref||_inf`` over the trial's
    instances and ``err_rel`` the largest ratio ``||out - ref||_inf /
    ||ref||_inf``.
    """

    err_abs: float
    err_rel: float
    per_instance_abs: np.ndarray
    per_instance_rel: np.ndarray
    seed: Optional[int] = None
    ledger: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def err_abs_bits(self) -> float:
        return _bits(self.err_abs)

    @property
    def err_rel_bits(self) -> float:
        return _bits(self.err_rel)

    def to_row(self) -> dict:
        led = self.ledger
        row = {
            "seed": self.seed,
            "n": self.meta.get("n"),
            "M": self.meta.get("M"),
            "k": self.meta.get("k"),
            "p": self.meta.get("p"),
            "p_bts": self.meta.get("p_bts"),
            "algo": self.meta.get("algo"),
            "err_abs_bits": self.err_abs_bits,
            "err_rel_bits": self.err_rel_bits,
            "levels_main": led.get("levels_consumed_main"),
            "levels_aux": led.get("levels_consumed_aux"),
            "ct_mults": led.get("mult_ct_ct"),
            "rotations": led.get("rotations"),
            "bootstraps": led.get("bootstraps"),
        }
        return row


def _bits(err: float) -> float:
    return math.inf if err == 0 else -math.log2(err)


def measure_errors(outputs, references, seed=None, ledger=None, **meta) -> TrialResult:
    """Compare outputs with reference Softmax values instance by instance."""
    out = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    ref = np.atleast_2d(np.asarray(references, dtype=np.float64))
    if out.shape != ref.shape:
        raise ValueError(f"shape mismatch {out.shape} vs {ref.shape}")
    norms = np.max(np.abs(ref), axis=1)
    if np.any(norms == 0):
        raise ValueError("reference has zero norm")
    abs_err = np.max(np.abs(out - ref), axis=1)
    rel_err = abs_err / norms
    led = ledger.to_dict() if hasattr(ledger, "to_dict") else dict(ledger or {})
    return TrialResult(float(abs_err.max()), float(rel_err.max()), abs_err, rel_err, seed, led, meta)


def summarize(errors: Sequence[float]) -> dict:
    """Worst, average and spread of precision over trials, in bits.

    ``average_bits`` is ``-log2`` of the mean error and ``std_bits`` the
    standard deviation of the per-trial bit values.
    """
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("no errors to summarize")
    bits = np.array([_bits(v) for v in e])
    finite = bits[np.isfinite(bits)]
    return {
        "worst_bits": _bits(float(e.max())),
        "average_bits": _bits(float(e.mean())),
        "std_bits": float(np.std(finite)) if finite.size else 0.0,
    }


def sample_inputs(dist: str, M: float, n: int, count: int, seed) -> np.ndarray:
    """Random inputs in ``[-M, 0]``, shape ``(count, n)``.

    ``normal`` draws from ``N(-M/2, (M/6)^2)`` and redraws anything outside
    ``[-M, 0]``; ``uniform`` draws from ``U[-M, 0]``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if dist == "uniform":
        return rng.uniform(-M, 0.0, size=(count, n))
    if dist != "normal":
        raise ValueError(f"unknown distribution {dist!r}")
    x = rng.normal(-M / 2.0, M / 6.0, size=(count, n))
    bad = (x < -M) | (x > 0)
    while bad.any():
        x[bad] = rng.normal(-M / 2.0, M / 6.0, size=int(bad.sum()))
        bad = (x < -M) | (x > 0)
    return x
