"""Environment eigenspectrum and the initial-state-conditional DOS.

The conditional density of states weighs each environment eigenlevel by the
overlap probability |<E_j|phi>|^2 of the prepared initial environment
state, showing which part of the bath spectrum is actually available for
decoherence at a given preparation temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, NumericalConsistencyError
from .hamiltonian import CouplingTable, Part, operator_for
from .hilbert import StateVector
from .rdm import SystemEigensystem

#: dense-diagonalization ceiling for the environment
MAX_DENSE_ENV_SPINS = 14

DEFAULT_BINS = 61


def environment_spectrum(table: CouplingTable) -> SystemEigensystem:
    """Full dense eigendecomposition of H_env (environment-local space)."""
    if table.n_e > MAX_DENSE_ENV_SPINS:
        raise CapacityError(
            f"dense environment spectrum capped at n_e={MAX_DENSE_ENV_SPINS} "
            f"(got {table.n_e}); stochastic kernel-polynomial estimators are "
            f"out of scope"
        )
    op = operator_for(table, Part.ENVIRONMENT, "environment")
    energies, vectors = np.linalg.eigh(op.dense())
    width = float(energies[-1] - energies[0])
    return SystemEigensystem(energies, vectors.astype(np.complex128),
                             1e-9 * width)


@dataclass
class ConditionalDOS:
    """Histogram of spectral weight |<E_j|phi>|^2 over energy bins."""

    bin_edges: np.ndarray
    weights: np.ndarray
    n_levels: int

    def __post_init__(self):
        if np.any(self.weights < -1e-15):
            raise NumericalConsistencyError("negative DOS weight")
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-10:
            raise NumericalConsistencyError(f"DOS weights sum to {total!r}")

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def mean_energy(self) -> float:
        return float(self.bin_centers @ self.weights)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("bin_center,weight\n")
            for c, w in zip(self.bin_centers, self.weights):
                fh.write(f"{c:.17g},{w:.17g}\n")


def conditional_dos(spectrum: SystemEigensystem, phi: StateVector,
                    n_bins: int = DEFAULT_BINS) -> ConditionalDOS:
    """Bin the eigenlevel overlaps of a normalized environment state.

    Bins are uniform over the full spectral range; a colder preparation
    shifts the weight toward the low-energy bins.
    """
    if n_bins < 2:
        raise ValueError(f"need n_bins >= 2, got {n_bins}")
    if abs(phi.norm() - 1.0) > 1e-10:
        raise NumericalConsistencyError("conditional DOS needs a normalized state")
    overlaps = np.abs(spectrum.vectors.conj().T @ phi.data) ** 2
    lo = float(spectrum.energies[0])
    hi = float(spectrum.energies[-1])
    if hi - lo < 1e-12:  # flat spectrum (e.g. all couplings zero)
        lo, hi = lo - 1e-6, hi + 1e-6
    weights, edges = np.histogram(spectrum.energies, bins=n_bins,
                                  range=(lo, hi), weights=overlaps)
    weights = weights / weights.sum()
    return ConditionalDOS(edges, weights, len(spectrum.energies))
