"""Softmax under a simulated CKKS model, by normalizing and squaring."""
from .analysis import TrialResult, measure_errors, sample_inputs, theorem_bound
from .errors import (
    DomainError,
    FixedPointOverflowError,
    HEModelError,
    InfeasibleError,
    LayoutError,
    OutOfBudgetError,
)
from .layout import PackingLayout
from .packing import amortized_report, pack_many, pack_single, softmax_instances, softmax_many, unpack
from .polyapprox import ApproxSpec, Polynomial, chebyshev_interpolant, fit_to_bits, remez_minimax
from .slotvm import Ciphertext, CostLedger, SlotVM, VmConfig
from .softmax_core import (
    NormalizationState,
    SoftmaxParams,
    build_plans,
    compute_k,
    softmax_A,
    softmax_B,
    softmax_exact,
    softmax_naive,
)

__version__ = "0.1.0"
