"""Slot layouts for packing many Softmax instances into ciphertexts.

Both packings share one formula. With ``stride = N0 * m / n`` lanes, the
``n / m`` coordinates held by ciphertext ``j`` are global coordinates
``j * n/m + c`` and coordinate ``c`` of lane ``l`` lives in slot
``c * stride + l``. With ``m = 1`` this is the one-ciphertext layout
(coordinate ``i`` at slot ``i * N0/n + l``), and with ``L = stride`` every
lane carries an instance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError


def _pow2(v: int) -> bool:
    return v >= 1 and v & (v - 1) == 0


@dataclass(frozen=True)
class PackingLayout:
    """Placement of ``L`` Softmax instances of dimension ``n`` in ``m`` ciphertexts.

    Attributes:
        N0: slots per ciphertext.
        n: Softmax dimension.
        L: number of instances.
        m: number of ciphertexts.
    """

    N0: int
    n: int
    L: int = 1
    m: int = 1

    def __post_init__(self):
        for name in ("N0", "n", "L", "m"):
            if not _pow2(getattr(self, name)):
                raise LayoutError(f"{name} must be a power of two, got {getattr(self, name)}")
        if self.n > self.N0 * self.m:
            raise LayoutError(f"n={self.n} does not fit in {self.m} ciphertexts of {self.N0} slots")
        if self.m > self.n:
            raise LayoutError(f"m={self.m} exceeds n={self.n}: a ciphertext would hold no coordinate")
        if self.m == 1:
            if self.L * self.n > self.N0:
                raise LayoutError(f"L*n = {self.L * self.n} exceeds N0 = {self.N0}")
        elif self.L * self.n != self.N0 * self.m:
            raise LayoutError(
                f"with m={self.m} ciphertexts L*n must equal m*N0 "
                f"(L={self.L}, n={self.n}, N0={self.N0}); use L={self.N0 * self.m // self.n}"
            )

    @classmethod
    def single(cls, N0: int, n: int, L: int = None) -> "PackingLayout":
        return cls(N0, n, N0 // n if L is None else L, 1)

    @classmethod
    def many(cls, N0: int, n: int, m: int) -> "PackingLayout":
        return cls(N0, n, N0 * m // n, m)

    @property
    def stride(self) -> int:
        """Lanes per ciphertext (distance between consecutive coordinates)."""
        return self.N0 * self.m // self.n

    @property
    def coords_per_ct(self) -> int:
        return self.n // self.m

    @property
    def tree_depth(self) -> int:
        """Rotate-add steps needed to sum the coordinates of one ciphertext."""
        return int(np.log2(self.coords_per_ct))

    def active_mask(self) -> np.ndarray:
        """Boolean slot mask of lanes holding real instances."""
        lanes = np.arange(self.N0) % self.stride
        return (lanes < self.L) & (np.arange(self.N0) < self.coords_per_ct * self.stride)

    def lane_mask(self) -> np.ndarray:
        """Plaintext keeping coordinate 0 of every lane."""
        mask = np.zeros(self.N0)
        mask[: self.stride] = 1.0
        return mask

    def to_json(self) -> str:
        return json.dumps({"N0": self.N0, "n": self.n, "L": self.L, "m": self.m})

    @classmethod
    def from_json(cls, text: str) -> "PackingLayout":
        d = json.loads(text)
        return cls(d["N0"], d["n"], d["L"], d["m"])

    # -- array-level packing -------------------------------------------

    def pack_arrays(self, instances, pad_value: float = 0.0) -> list:
        """Slot vectors for ``instances`` (shape ``(L, n)``), one per ciphertext.

        Unused lanes hold an instance whose coordinates all equal ``pad_value``.
        """
        x = np.asarray(instances, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape != (self.L, self.n):
            raise LayoutError(f"expected instances of shape ({self.L}, {self.n}), got {x.shape}")
        full = np.full((self.stride, self.n), float(pad_value))
        full[: self.L] = x
        out = []
        per = self.coords_per_ct
        used = per * self.stride
        for j in range(self.m):
            block = full[:, j * per : (j + 1) * per]
            slots = np.full(self.N0, float(pad_value))
            slots[:used] = block.T.reshape(-1)
            out.append(slots)
        return out

    def unpack_arrays(self, slot_vectors) -> np.ndarray:
        """Inverse of :meth:`pack_arrays`; returns shape ``(L, n)``."""
        if len(slot_vectors) != self.m:
            raise LayoutError(f"expected {self.m} slot vectors, got {len(slot_vectors)}")
        per = self.coords_per_ct
        used = per * self.stride
        cols = [np.asarray(v)[:used].reshape(per, self.stride).T for v in slot_vectors]
        return np.concatenate(cols, axis=1)[: self.L]
