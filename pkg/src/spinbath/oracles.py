"""Dense exact-diagonalization cross-checks for small models.

Everything here is built through an independent route (explicit Kronecker
products of 2x2 spin matrices, loop-based partial traces, dense
eigendecomposition propagators) so it can arbitrate the production kernels.
Intended for CI and the ``spinbath oracle`` subcommand; dimensions are
deliberately small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .hamiltonian import (
    CouplingTable,
    Part,
    env_pairs,
    operator_for,
    ring_bonds,
)
from .hilbert import HilbertLayout, StateVector
from .propagator import evolve_imag, evolve_real, ground_state, spectral_bounds
from .rdm import reduce_to_system
from .typicality import gaussian_unit_vector

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex) / 2.0
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex) / 2.0
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex) / 2.0
_PAULIS = (_SX, _SY, _SZ)


def _op_on_bit(n_spins: int, bit: int, m: np.ndarray) -> np.ndarray:
    """Embed a single-spin operator on one bit (bit 0 = fastest index)."""
    out = np.kron(m, np.eye(2**bit))
    return np.kron(np.eye(2 ** (n_spins - 1 - bit)), out)


def two_spin_term(n_spins: int, a: int, b: int, alpha: int) -> np.ndarray:
    return _op_on_bit(n_spins, a, _PAULIS[alpha]) @ _op_on_bit(
        n_spins, b, _PAULIS[alpha])


def dense_hamiltonian(table: CouplingTable, part: Part,
                      space: str = "composite") -> np.ndarray:
    """Dense H_part built term by term from Kronecker products."""
    n_s, n_e = table.n_s, table.n_e
    n = {"composite": n_s + n_e, "system": n_s, "environment": n_e}[space]
    if 2**n > 4096:
        raise CapacityError("oracle route capped at 12 spins")
    h = np.zeros((2**n, 2**n), dtype=complex)
    env_off = n_s if space == "composite" else 0
    if part in (Part.SYSTEM, Part.TOTAL):
        for (a, b) in ring_bonds(n_s):
            for alpha in range(3):
                h -= table.j * two_spin_term(n, a, b, alpha)
    if part in (Part.ENVIRONMENT, Part.TOTAL):
        for q, (a, b) in enumerate(env_pairs(n_e)):
            for alpha in range(3):
                h -= table.omega[q, alpha] * two_spin_term(
                    n, a + env_off, b + env_off, alpha)
    if part in (Part.INTERACTION, Part.TOTAL):
        for i in range(n_s):
            for jj in range(n_e):
                for alpha in range(3):
                    h -= table.delta[i, jj, alpha] * two_spin_term(
                        n, i, n_s + jj, alpha)
    return h


def dense_evolve(h: np.ndarray, psi: np.ndarray, t: complex) -> np.ndarray:
    """exp(-i t H) psi by full eigendecomposition (t may be imaginary)."""
    energies, vectors = np.linalg.eigh(h)
    phases = np.exp(-1j * t * energies)
    return vectors @ (phases * (vectors.conj().T @ psi))


def loop_partial_trace(psi: np.ndarray, d_s: int, d_e: int) -> np.ndarray:
    """rho_ij = sum_p conj(c(i,p)) c(j,p) by explicit index loops."""
    rho = np.zeros((d_s, d_s), dtype=complex)
    for i in range(d_s):
        for j in range(d_s):
            acc = 0.0 + 0.0j
            for p in range(d_e):
                acc += np.conj(psi[i + d_s * p]) * psi[j + d_s * p]
            rho[i, j] = acc
    return rho


@dataclass
class OracleCheck:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tol


def oracle_suite(table: CouplingTable, seed: int = 0) -> list[OracleCheck]:
    """Cross-check the matrix-free kernels against the dense oracle route."""
    lay = table.layout
    if lay.dim > 4096:
        raise CapacityError(
            f"oracle suite needs n_s + n_e <= 12, got {lay.n_spins} spins")
    rng = np.random.default_rng(seed)
    psi = gaussian_unit_vector(lay.dim, rng)
    checks = []

    h_total = dense_hamiltonian(table, Part.TOTAL)
    for part in Part:
        h = dense_hamiltonian(table, part)
        op = operator_for(table, part)
        err = np.linalg.norm(op.apply(psi) - h @ psi)
        checks.append(OracleCheck(f"apply_{part.value}_vs_dense", float(err), 1e-13))

    err = np.max(np.abs(operator_for(table, Part.TOTAL).dense() - h_total))
    checks.append(OracleCheck("dense_builder_vs_kron", float(err), 1e-13))

    phi = gaussian_unit_vector(lay.dim, rng)
    op = operator_for(table, Part.TOTAL)
    herm = abs(np.vdot(phi, op.apply(psi)) - np.conj(np.vdot(psi, op.apply(phi))))
    checks.append(OracleCheck("hermiticity", float(herm), 1e-13))

    sv = StateVector(psi.copy(), lay)
    window = spectral_bounds(table, Part.TOTAL)
    ev = evolve_real(sv, table, 5.0, window=window)
    ref = dense_evolve(h_total, psi, 5.0)
    checks.append(OracleCheck("evolve_real_t5_vs_dense",
                              float(np.linalg.norm(ev.data - ref)), 1e-11))
    checks.append(OracleCheck("evolve_real_norm",
                              abs(float(np.linalg.norm(ev.data)) - 1.0), 1e-12))

    im = evolve_imag(sv, table, Part.TOTAL, 1.0)
    ref_im = dense_evolve(h_total, psi, -1.0j)
    ref_im /= np.linalg.norm(ref_im)
    checks.append(OracleCheck("evolve_imag_beta2_vs_dense",
                              float(np.linalg.norm(im.data - ref_im)), 1e-11))

    e0, gs = ground_state(table, Part.TOTAL, seed=seed + 1)
    lam = np.linalg.eigvalsh(h_total)
    checks.append(OracleCheck("ground_energy_vs_dense",
                              abs(e0 - float(lam[0])), 1e-9))
    res = np.linalg.norm(operator_for(table, Part.TOTAL).apply(gs.data)
                         - e0 * gs.data)
    checks.append(OracleCheck("ground_residual", float(res), 1e-10))

    win = spectral_bounds(table, Part.TOTAL)
    violation = max(0.0, win.lo - float(lam[0]), float(lam[-1]) - win.hi)
    checks.append(OracleCheck("spectral_window_covers", violation, 0.0))

    rho = reduce_to_system(StateVector(psi.copy(), lay))
    ref_rho = loop_partial_trace(psi, lay.d_s, lay.d_e)
    checks.append(OracleCheck("partial_trace_vs_loop",
                              float(np.max(np.abs(rho.matrix - ref_rho))), 1e-13))
    return checks
