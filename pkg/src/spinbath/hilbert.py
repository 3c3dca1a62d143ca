"""Composite Hilbert-space layout and elementary state-vector algebra.

Conventions used everywhere in the package:

* spin b of the composite lives on bit b of the basis index; bit value 0 is
  "up" (m = +1/2), bit value 1 is "down",
* the ``n_s`` system spins occupy the LOW-order bits, the ``n_e`` environment
  spins the high-order bits, so a composite index decomposes as
  ``k = i + d_s * p`` with system index ``i`` and environment index ``p``.

The low-bit placement makes the partial trace over the environment a
contiguous ``reshape(d_e, d_s)`` operation, which is the hottest analysis
kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ShapeMismatchError, ZeroNormError

#: hard ceiling on the composite dimension (dense complex amplitudes)
MAX_COMPOSITE_DIM = 2**24


@dataclass(frozen=True)
class HilbertLayout:
    """Bit-indexed tensor factorization: system spins x environment spins."""

    n_s: int
    n_e: int

    def __post_init__(self):
        if self.n_s < 1:
            raise CapacityError(f"need at least one system spin, got n_s={self.n_s}")
        if self.n_e < 0:
            raise CapacityError(f"n_e must be non-negative, got {self.n_e}")
        if 2 ** (self.n_s + self.n_e) > MAX_COMPOSITE_DIM:
            raise CapacityError(
                f"composite dimension 2^{self.n_s + self.n_e} exceeds the "
                f"supported ceiling 2^24"
            )

    @property
    def n_spins(self) -> int:
        return self.n_s + self.n_e

    @property
    def d_s(self) -> int:
        return 2**self.n_s

    @property
    def d_e(self) -> int:
        return 2**self.n_e

    @property
    def dim(self) -> int:
        return self.d_s * self.d_e


def split_index(k: int, layout: HilbertLayout) -> tuple[int, int]:
    """Decompose a composite basis index into (system, environment) indices."""
    if not 0 <= k < layout.dim:
        raise IndexError(f"basis index {k} outside [0, {layout.dim})")
    return k % layout.d_s, k // layout.d_s


def combine_index(i: int, p: int, layout: HilbertLayout) -> int:
    """Inverse of :func:`split_index`."""
    if not 0 <= i < layout.d_s:
        raise IndexError(f"system index {i} outside [0, {layout.d_s})")
    if not 0 <= p < layout.d_e:
        raise IndexError(f"environment index {p} outside [0, {layout.d_e})")
    return i + layout.d_s * p


@dataclass
class StateVector:
    """Dense complex amplitudes over the composite basis of a layout."""

    data: np.ndarray
    layout: HilbertLayout

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        if self.data.shape != (self.layout.dim,):
            raise ShapeMismatchError(
                f"amplitude array of shape {self.data.shape} does not match "
                f"layout dimension {self.layout.dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def copy(self) -> "StateVector":
        return StateVector(self.data.copy(), self.layout)


def _check_same_layout(a: StateVector, b: StateVector):
    if a.layout != b.layout:
        raise ShapeMismatchError(f"layout mismatch: {a.layout} vs {b.layout}")


def inner(a: StateVector, b: StateVector) -> complex:
    """Hermitian inner product <a|b> = sum_k conj(a_k) b_k."""
    _check_same_layout(a, b)
    return complex(np.vdot(a.data, b.data))


def normalize(psi: StateVector) -> StateVector:
    """Return psi scaled to unit 2-norm (out of place)."""
    n = psi.norm()
    if n < 1e-250 or not math.isfinite(n):
        raise ZeroNormError(f"cannot normalize state with norm {n}")
    return StateVector(psi.data / n, psi.layout)


def basis_state(layout: HilbertLayout, k: int) -> StateVector:
    """Computational basis state |k>."""
    if not 0 <= k < layout.dim:
        raise IndexError(f"basis index {k} outside [0, {layout.dim})")
    data = np.zeros(layout.dim, dtype=np.complex128)
    data[k] = 1.0
    return StateVector(data, layout)


def system_basis_index(layout: HilbertLayout, label) -> int:
    """Resolve a system basis label to a system index in [0, d_s).

    Accepts an integer index, ``"all_up"`` (every system spin up) or
    ``"neel"`` (alternating up/down starting with up on spin 0).
    """
    if isinstance(label, (int, np.integer)):
        i = int(label)
        if not 0 <= i < layout.d_s:
            raise IndexError(f"system basis label {i} outside [0, {layout.d_s})")
        return i
    if label == "all_up":
        return 0
    if label == "neel":
        # down spins (bit value 1) on odd sites: |up down up down ...>
        return sum(1 << b for b in range(1, layout.n_s, 2))
    raise ValueError(f"unknown system basis label {label!r}")


def product_with_environment(
    sys_index: int, env: np.ndarray, layout: HilbertLayout
) -> StateVector:
    """Tensor product |sys_index> (x) |env> in the composite layout.

    ``env`` is a d_e-dimensional amplitude array over the environment factor.
    """
    if env.shape != (layout.d_e,):
        raise ShapeMismatchError(
            f"environment factor has shape {env.shape}, expected ({layout.d_e},)"
        )
    data = np.zeros(layout.dim, dtype=np.complex128)
    data[sys_index :: layout.d_s] = env
    return StateVector(data, layout)
