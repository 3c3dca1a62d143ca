"""Spin-1/2 Hamiltonians: random couplings and matrix-free application.

The composite Hamiltonian is H = H_sys + H_env + H_int with

* H_sys: isotropic exchange -J sum_alpha S_i^alpha S_j^alpha on the bonds of
  a ring of n_s spins (a 2-ring has a single bond),
* H_env: -Omega_ij^alpha I_i^alpha I_j^alpha on every pair of the n_e
  environment spins (complete graph),
* H_int: -Delta_ij^alpha S_i^alpha I_j^alpha between every system spin and
  every environment spin,

with spin operators S = sigma/2 and hbar = k_B = 1.  The random couplings
Delta and Omega are independent uniform draws from [-bound, +bound) per
(i, j, alpha).
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import apply_terms
from .errors import (
    CapacityError,
    ConfigError,
    NumericalConsistencyError,
    ShapeMismatchError,
)
from .hilbert import HilbertLayout, StateVector

#: dense materialization ceiling (2^14 x 2^14 real matrix = 2 GiB)
MAX_DENSE_DIM = 2**14

_ALPHAS = ("x", "y", "z")


class Part(enum.Enum):
    """Selector for one piece of H = H_sys + H_env + H_int."""

    SYSTEM = "system"
    ENVIRONMENT = "environment"
    INTERACTION = "interaction"
    TOTAL = "total"


def ring_bonds(n_s: int) -> list[tuple[int, int]]:
    """Bonds (i < j) of the system ring; one bond for n_s = 2, none for 1."""
    bonds = {tuple(sorted((i, (i + 1) % n_s))) for i in range(n_s) if n_s > 1}
    return sorted(bonds)


def env_pairs(n_e: int) -> list[tuple[int, int]]:
    """All pairs (i < j) of environment spins, lexicographic."""
    return [(i, j) for i in range(n_e) for j in range(i + 1, n_e)]


@dataclass(frozen=True)
class CouplingTable:
    """All exchange constants defining one model instance.

    ``delta`` has shape (n_s, n_e, 3) (components x, y, z), ``omega`` has
    shape (n_pairs, 3) with pairs enumerated by :func:`env_pairs`.  ``seed``
    is the integer that regenerates the random entries bit-exactly; it is
    None for explicitly constructed tables.
    """

    n_s: int
    n_e: int
    j: float
    delta_bound: float
    omega_bound: float
    seed: int | None
    delta: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "delta", np.ascontiguousarray(self.delta, dtype=np.float64)
        )
        object.__setattr__(
            self, "omega", np.ascontiguousarray(self.omega, dtype=np.float64)
        )
        if self.delta.shape != (self.n_s, self.n_e, 3):
            raise ShapeMismatchError(f"delta has shape {self.delta.shape}")
        if self.omega.shape != (len(env_pairs(self.n_e)), 3):
            raise ShapeMismatchError(f"omega has shape {self.omega.shape}")

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout(self.n_s, self.n_e)

    def sha256(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n_s},{self.n_e},{self.j!r}".encode())
        h.update(self.delta.tobytes())
        h.update(self.omega.tobytes())
        return h.hexdigest()

    def to_json_dict(self, explicit_arrays: bool = False) -> dict:
        doc = {
            "n_s": self.n_s,
            "n_e": self.n_e,
            "j": self.j,
            "delta_bound": self.delta_bound,
            "omega_bound": self.omega_bound,
            "seed": self.seed,
        }
        if explicit_arrays or self.seed is None:
            doc["delta"] = self.delta.tolist()
            doc["omega"] = self.omega.tolist()
        return doc

    def to_json(self, explicit_arrays: bool = False) -> str:
        return json.dumps(self.to_json_dict(explicit_arrays), indent=2)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CouplingTable":
        if "delta" in doc or "omega" in doc:
            return explicit_couplings(
                n_s=doc["n_s"],
                n_e=doc["n_e"],
                j=doc["j"],
                delta=np.asarray(doc["delta"], dtype=np.float64),
                omega=np.asarray(doc["omega"], dtype=np.float64),
                delta_bound=doc.get("delta_bound", 0.0),
                omega_bound=doc.get("omega_bound", 0.0),
                seed=doc.get("seed"),
            )
        return sample_couplings(
            doc["n_s"],
            doc["n_e"],
            doc["j"],
            doc["delta_bound"],
            doc["omega_bound"],
            doc["seed"],
        )

    @classmethod
    def from_json(cls, text: str) -> "CouplingTable":
        return cls.from_json_dict(json.loads(text))


def sample_couplings(
    n_s: int,
    n_e: int,
    j: float,
    delta_bound: float,
    omega_bound: float,
    seed: int,
) -> CouplingTable:
    """Draw a coupling table reproducibly from a 64-bit seed.

    One PCG64 stream is consumed in a fixed order: first all Delta entries in
    C-order of (i, j, alpha), then all Omega entries in C-order of
    (pair, alpha).  Entries are ``bound * (2u - 1)`` with u a 53-bit uniform
    in [0, 1), i.e. values in [-bound, +bound).  The draw count is
    independent of the bounds, so rescaling a bound keeps all other entries
    identical.
    """
    if n_s < 1:
        raise ConfigError(f"need at least one system spin, got n_s={n_s}")
    if n_e < 0:
        raise ConfigError(f"n_e must be non-negative, got {n_e}")
    if delta_bound < 0 or omega_bound < 0:
        raise ConfigError("coupling bounds must be non-negative")
    HilbertLayout(n_s, n_e)  # capacity check
    rng = np.random.default_rng(seed)
    delta = delta_bound * (2.0 * rng.random((n_s, n_e, 3)) - 1.0)
    omega = omega_bound * (2.0 * rng.random((len(env_pairs(n_e)), 3)) - 1.0)
    return CouplingTable(n_s, n_e, float(j), float(delta_bound),
                         float(omega_bound), int(seed), delta, omega)


def explicit_couplings(
    n_s: int,
    n_e: int,
    j: float,
    delta: np.ndarray | None = None,
    omega: np.ndarray | None = None,
    delta_bound: float = 0.0,
    omega_bound: float = 0.0,
    seed: int | None = None,
) -> CouplingTable:
    """Coupling table with caller-supplied arrays (geometry/tests override)."""
    if delta is None:
        delta = np.zeros((n_s, n_e, 3))
    if omega is None:
        omega = np.zeros((len(env_pairs(n_e)), 3))
    return CouplingTable(n_s, n_e, float(j), float(delta_bound),
                         float(omega_bound), seed, np.asarray(delta),
                         np.asarray(omega))


def _bond_list(table: CouplingTable, part: Part, space: str):
    """Two-spin terms of a part as (bit_a, bit_b, c_x, c_y, c_z) tuples.

    c_alpha is the full signed coefficient of S_a^alpha S_b^alpha in H
    (the overall minus sign of the exchange form is folded in).  ``space``
    selects the bit embedding: "composite" (system on low bits), "system"
    (d_s-dimensional factor) or "environment" (d_e-dimensional factor).
    """
    n_s, n_e = table.n_s, table.n_e
    env_off = {"composite": n_s, "environment": 0}
    bonds = []
    if part in (Part.SYSTEM, Part.TOTAL):
        if space not in ("composite", "system"):
            raise ShapeMismatchError(f"system terms unavailable in {space!r} space")
        for (a, b) in ring_bonds(n_s):
            bonds.append((a, b, -table.j, -table.j, -table.j))
    if part in (Part.ENVIRONMENT, Part.TOTAL):
        if space not in ("composite", "environment"):
            raise ShapeMismatchError(f"environment terms unavailable in {space!r} space")
        off = env_off[space]
        for q, (a, b) in enumerate(env_pairs(n_e)):
            cx, cy, cz = -table.omega[q]
            bonds.append((a + off, b + off, cx, cy, cz))
    if part in (Part.INTERACTION, Part.TOTAL):
        if space != "composite":
            raise ShapeMismatchError("interaction terms exist only in the composite space")
        for i in range(n_s):
            for jj in range(n_e):
                cx, cy, cz = -table.delta[i, jj]
                bonds.append((i, n_s + jj, cx, cy, cz))
    return bonds


class HamiltonianOperator:
    """One Hamiltonian part compiled to flat term arrays for fast application.

    Immutable after construction; apply() is safe to call concurrently.
    """

    def __init__(self, table: CouplingTable, part: Part, space: str = "composite"):
        self.table = table
        self.part = part
        self.space = space
        if space == "composite":
            self.dim = table.layout.dim
        elif space == "system":
            self.dim = table.layout.d_s
        elif space == "environment":
            self.dim = table.layout.d_e
        else:
            raise ValueError(f"unknown operator space {space!r}")
        bonds = _bond_list(table, part, space)
        n = len(bonds)
        self._shift_a = np.empty(n, dtype=np.int64)
        self._shift_b = np.empty(n, dtype=np.int64)
        self._mask = np.empty(n, dtype=np.int64)
        self._w_equal = np.empty(n, dtype=np.float64)
        self._w_diff = np.empty(n, dtype=np.float64)
        cz = np.empty(n, dtype=np.float64)
        for q, (a, b, cx, cyy, czz) in enumerate(bonds):
            self._shift_a[q] = a
            self._shift_b[q] = b
            self._mask[q] = (1 << a) | (1 << b)
            self._w_equal[q] = 0.25 * (cx - cyy)
            self._w_diff[q] = 0.25 * (cx + cyy)
            cz[q] = czz
        # all z-z terms collapse into one diagonal: 0.25 * c_z * s_a * s_b
        idx = np.arange(self.dim, dtype=np.int64)
        diag = np.zeros(self.dim, dtype=np.float64)
        for q in range(n):
            s_a = 1.0 - 2.0 * ((idx >> self._shift_a[q]) & 1)
            s_b = 1.0 - 2.0 * ((idx >> self._shift_b[q]) & 1)
            diag += 0.25 * cz[q] * s_a * s_b
        self._diag = diag

    @property
    def diagonal(self) -> np.ndarray:
        return self._diag

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """out = H @ psi on raw amplitude arrays."""
        if psi.shape != (self.dim,):
            raise ShapeMismatchError(
                f"state of shape {psi.shape} does not match operator dimension {self.dim}"
            )
        if out is None:
            out = np.empty_like(psi)
        apply_terms(psi, self._diag, self._mask, self._shift_a, self._shift_b,
                    self._w_equal, self._w_diff, out)
        return out

    def apply_state(self, psi: StateVector) -> StateVector:
        return StateVector(self.apply(psi.data), psi.layout)

    def expectation(self, psi: np.ndarray) -> float:
        """Re <psi|H|psi>; raises if the imaginary part is non-negligible."""
        e = complex(np.vdot(psi, self.apply(psi)))
        if abs(e.imag) > 1e-12:
            raise NumericalConsistencyError(
                f"<H> has imaginary part {e.imag:.3e} (Hermiticity violation)"
            )
        return e.real

    def norm_bound(self) -> float:
        """Triangle-inequality bound on the spectral norm: sum of |c|/4."""
        flips = np.abs(self._w_equal) + np.abs(self._w_diff)  # = (|cx|+|cy|)/4
        cz4 = np.max(np.abs(self._diag)) if self.dim else 0.0
        return float(np.sum(flips) + cz4)

    def dense(self) -> np.ndarray:
        """Materialize the part as a real symmetric matrix (small dims only)."""
        if self.dim > MAX_DENSE_DIM:
            raise CapacityError(
                f"dense matrix of dimension {self.dim} exceeds ceiling {MAX_DENSE_DIM}"
            )
        idx = np.arange(self.dim, dtype=np.int64)
        mat = np.zeros((self.dim, self.dim), dtype=np.float64)
        mat[idx, idx] = self._diag
        for q in range(self._mask.shape[0]):
            neq = ((idx >> self._shift_a[q]) ^ (idx >> self._shift_b[q])) & 1
            w = np.where(neq == 1, self._w_diff[q], self._w_equal[q])
            mat[idx, idx ^ self._mask[q]] += w
        return mat


def operator_for(table: CouplingTable, part: Part, space: str = "composite"
                 ) -> HamiltonianOperator:
    return HamiltonianOperator(table, part, space)


def _space_for_state(table: CouplingTable, part: Part, psi: StateVector) -> str:
    """Infer the operator space from the state's layout."""
    if psi.layout == table.layout:
        return "composite"
    if part is Part.SYSTEM and psi.layout == HilbertLayout(table.n_s, 0):
        return "system"
    if part is Part.ENVIRONMENT and psi.layout == HilbertLayout(table.n_e, 0):
        return "environment"
    raise ShapeMismatchError(
        f"state layout {psi.layout} does not match couplings "
        f"(n_s={table.n_s}, n_e={table.n_e}) for part {part.value}"
    )


def apply(part: Part, table: CouplingTable, psi: StateVector) -> StateVector:
    """H_part @ psi, matrix-free.

    Accepts composite states, or factor states for the system/environment
    parts (layouts (n_s, 0) and (n_e, 0) respectively).
    """
    op = HamiltonianOperator(table, part, _space_for_state(table, part, psi))
    return op.apply_state(psi)


def dense_system_hamiltonian(table: CouplingTable) -> np.ndarray:
    """H_sys as a dense real symmetric d_s x d_s matrix (n_s <= 12)."""
    if table.n_s > 12:
        raise CapacityError(f"dense system Hamiltonian capped at n_s=12, got {table.n_s}")
    return HamiltonianOperator(table, Part.SYSTEM, "system").dense()


def energy_expectation(part: Part, table: CouplingTable, psi: StateVector) -> float:
    """Re <psi|H_part|psi> for a normalized state."""
    op = HamiltonianOperator(table, part, _space_for_state(table, part, psi))
    return op.expectation(psi.data)


def coupling_norm_bound(table: CouplingTable, part: Part) -> float:
    """Guaranteed cover of the spectral radius from coupling magnitudes."""
    space = "environment" if part is Part.ENVIRONMENT else (
        "system" if part is Part.SYSTEM else "composite")
    return HamiltonianOperator(table, part, space).norm_bound()
