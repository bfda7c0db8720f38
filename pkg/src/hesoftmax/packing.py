"""Packing many Softmax instances and running them with a shared auxiliary thread."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import LayoutError
from .layout import PackingLayout
from .slotvm import Ciphertext, CostLedger, SlotVM, VmConfig
from .softmax_core import NormalizationState, SoftmaxParams, SoftmaxPlans, run_softmax

__all__ = [
    "PackingLayout",
    "AmortizedReport",
    "pack_single",
    "pack_many",
    "unpack",
    "softmax_many",
    "amortized_report",
    "softmax_instances",
]


def pack_single(vm: SlotVM, instances, layout: Optional[PackingLayout] = None) -> Ciphertext:
    """Encode ``L`` instances into one ciphertext, coordinate-major.

    Slot ``i * (N0/n) + l`` holds coordinate ``i`` of instance ``l``. Lanes
    without an instance carry an all-zero input.
    """
    x = np.atleast_2d(np.asarray(instances, dtype=np.float64))
    layout = layout or PackingLayout.single(vm.cfg.n_slots, x.shape[1], x.shape[0])
    if layout.m != 1:
        raise LayoutError("pack_single needs a one-ciphertext layout")
    return vm.encode(layout.pack_arrays(x)[0])


def pack_many(vm: SlotVM, instances, m: int) -> List[Ciphertext]:
    """Encode ``L = m * N0 / n`` instances into ``m`` ciphertexts.

    Ciphertext ``j`` holds coordinates ``j*n/m`` to ``(j+1)*n/m - 1`` of every
    instance, with coordinate ``c`` of instance ``l`` in slot ``c*L + l``.
    """
    x = np.atleast_2d(np.asarray(instances, dtype=np.float64))
    layout = PackingLayout(vm.cfg.n_slots, x.shape[1], x.shape[0], m)
    return [vm.encode(v) for v in layout.pack_arrays(x)]


def unpack(cts, layout: PackingLayout) -> np.ndarray:
    """Decode ciphertexts back to an ``(L, n)`` array of instances."""
    if isinstance(cts, Ciphertext):
        cts = [cts]
    return layout.unpack_arrays([c.slots for c in cts])


def softmax_many(cts: List[Ciphertext], params: SoftmaxParams, plans: Optional[SoftmaxPlans] = None,
                 variant: str = "A", layout: Optional[PackingLayout] = None,
                 state: Optional[NormalizationState] = None) -> List[Ciphertext]:
    """All ``L`` Softmax of an ``m``-ciphertext packing.

    Every round squares each ciphertext, sums its coordinates with its own
    rotate-add tree, adds the ``m`` partial sums into one auxiliary
    ciphertext, inverts once and broadcasts once, so a round costs
    ``(m + 1) * log2(N0 / L)`` rotations.
    """
    if layout is None:
        vm = cts[0].vm
        layout = PackingLayout.many(vm.cfg.n_slots, params.n, len(cts))
    return run_softmax(list(cts), params, plans, layout, variant, state)


@dataclass(frozen=True)
class AmortizedReport:
    """Per-ciphertext costs of a batched run.

    Main-thread levels apply to every ciphertext; a level of the single
    shared auxiliary ciphertext is split over the ``m`` ciphertexts.
    """

    m: int
    levels_per_ct: float
    ct_mults_per_ct: float
    rotations_per_ct: float
    bootstraps_main: int
    bootstraps_aux: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def amortized_report(ledger: CostLedger, m: int) -> AmortizedReport:
    if m < 1:
        raise ValueError("m must be >= 1")
    return AmortizedReport(
        m=m,
        levels_per_ct=ledger.levels_consumed_main + ledger.levels_consumed_aux / m,
        ct_mults_per_ct=ledger.mult_ct_ct / m,
        rotations_per_ct=ledger.rotations / m,
        bootstraps_main=ledger.bootstraps_main,
        bootstraps_aux=ledger.bootstraps_aux,
    )


def softmax_instances(x, params: SoftmaxParams, cfg: VmConfig, variant: str = "A", m: int = 1,
                      plans: Optional[SoftmaxPlans] = None, state: Optional[NormalizationState] = None):
    """Pack, evaluate and unpack in one call.

    Args:
        x: instances, shape ``(L, n)``. With ``m = 1`` any ``L <= N0/n``
            works; otherwise ``L`` must equal ``m * N0 / n``.
        params: algorithm parameters.
        cfg: VM configuration (a fresh context is created).
        variant: ``"A"``, ``"B"`` or ``"naive"``.
        m: number of ciphertexts.

    Returns:
        ``(outputs, ledger)`` with outputs of shape ``(L, n)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    vm = SlotVM(cfg)
    layout = PackingLayout(cfg.n_slots, x.shape[1], x.shape[0], m)
    cts = [vm.encode(v) for v in layout.pack_arrays(x)]
    out = run_softmax(cts, params, plans, layout, variant, state)
    return unpack(out, layout), vm.ledger
