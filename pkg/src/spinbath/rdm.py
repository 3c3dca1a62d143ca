"""Reduced density matrix of the system and its relaxation diagnostics.

The evolving object is always the pure composite state; everything here is
pure post-processing: partial trace over the environment, eigenvalue
spectra, entropy, the decoherence measure sigma (off-diagonal weight in the
basis diagonalizing H_sys), the effective inverse temperature b fitted from
the diagonal, and the distance delta to the matching Boltzmann profile.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BasisError,
    NumericalConsistencyError,
    ShapeMismatchError,
    UndefinedBetaError,
)
from .hamiltonian import CouplingTable, dense_system_hamiltonian
from .hilbert import StateVector

SPIN_BASIS = "spin_product"
EIGEN_BASIS = "system_eigen"

#: diagonal entries at or below this are treated as zero population
DIAG_FLOOR = 1e-300


@dataclass
class ReducedDensityMatrix:
    """Hermitian, PSD, trace-one matrix of the system in a tagged basis."""

    matrix: np.ndarray
    basis: str = SPIN_BASIS

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ShapeMismatchError(f"RDM must be square, got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def validate(self, trace_tol: float = 1e-12, herm_tol: float = 1e-12,
                 psd_tol: float = 1e-12):
        """Raise unless Hermitian/trace-1/PSD within the given tolerances."""
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > herm_tol:
            raise NumericalConsistencyError(f"RDM not Hermitian: max dev {herm:.3e}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > trace_tol:
            raise NumericalConsistencyError(f"RDM trace {tr} deviates from 1")
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if lam[0] < -psd_tol:
            raise NumericalConsistencyError(f"RDM has eigenvalue {lam[0]:.3e} < 0")
        return self


@dataclass(frozen=True)
class SystemEigensystem:
    """Eigenbasis of the (deterministic) system Hamiltonian.

    ``energies`` ascending, ``vectors`` columns; ``eps_deg`` is the absolute
    tolerance deciding which level pairs count as degenerate.
    """

    energies: np.ndarray
    vectors: np.ndarray
    eps_deg: float

    @classmethod
    def from_table(cls, table: CouplingTable) -> "SystemEigensystem":
        h = dense_system_hamiltonian(table)
        energies, vectors = np.linalg.eigh(h)
        width = float(energies[-1] - energies[0])
        return cls(energies, vectors.astype(np.complex128), 1e-9 * width)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def ground_multiplet(self) -> np.ndarray:
        return np.nonzero(self.energies <= self.energies[0] + self.eps_deg)[0]


def reduce_to_system(psi: StateVector) -> ReducedDensityMatrix:
    """Partial trace of |psi><psi| over the environment.

    With the system on the low-order bits this is a single reshape plus a
    Gram product: rho_ij = sum_p conj(c(i, p)) c(j, p).
    """
    lay = psi.layout
    a = psi.data.reshape(lay.d_e, lay.d_s)
    rho = a.conj().T @ a
    rho = 0.5 * (rho + rho.conj().T)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-10:
        raise NumericalConsistencyError(
            f"reduced density matrix has trace {tr!r}; is the state normalized?"
        )
    return ReducedDensityMatrix(rho / tr, SPIN_BASIS)


def to_system_eigenbasis(rho: ReducedDensityMatrix,
                         es: SystemEigensystem) -> ReducedDensityMatrix:
    """Rotate a spin-product-basis RDM into the basis diagonalizing H_sys."""
    if rho.basis != SPIN_BASIS:
        raise BasisError(f"expected a {SPIN_BASIS} RDM, got {rho.basis}")
    v = es.vectors
    return ReducedDensityMatrix(v.conj().T @ rho.matrix @ v, EIGEN_BASIS)


def rdm_spectrum(rho: ReducedDensityMatrix, clamp: bool = True) -> np.ndarray:
    """Eigenvalues of the RDM, descending; tiny negatives clamped to 0."""
    lam = np.linalg.eigvalsh(rho.matrix)[::-1].copy()
    if lam[-1] < -1e-12:
        raise NumericalConsistencyError(f"RDM eigenvalue {lam[-1]:.3e} < -1e-12")
    if abs(lam.sum() - 1.0) > 1e-12:
        raise NumericalConsistencyError(f"RDM eigenvalues sum to {lam.sum()!r}")
    if clamp:
        np.clip(lam, 0.0, None, out=lam)
    return lam


def eigenvalue_variance(lam: np.ndarray, lam_ref: np.ndarray) -> float:
    """Root-sum-square distance between two RDM spectra.

    Both spectra are sorted descending before pairing, which keeps the
    pairing well defined through eigenvalue crossings.
    """
    lam = np.asarray(lam, dtype=float)
    lam_ref = np.asarray(lam_ref, dtype=float)
    if lam.shape != lam_ref.shape:
        raise ShapeMismatchError(f"spectra of shapes {lam.shape} vs {lam_ref.shape}")
    a = np.sort(lam)[::-1]
    b = np.sort(lam_ref)[::-1]
    return float(np.sqrt(np.sum((a - b) ** 2)))


def entropy(lam: np.ndarray) -> float:
    """von Neumann entropy -sum lam ln lam with 0 ln 0 := 0."""
    lam = np.asarray(lam, dtype=float)
    if lam.min() < -1e-10:
        raise NumericalConsistencyError(f"eigenvalue {lam.min():.3e} < -1e-10")
    if abs(lam.sum() - 1.0) > 1e-10:
        raise NumericalConsistencyError(f"eigenvalues sum to {lam.sum()!r}, not 1")
    pos = lam[lam > 0.0]
    return float(-np.sum(pos * np.log(pos)))


def coherence_sigma(rho: ReducedDensityMatrix) -> float:
    """Root-sum-square of the strictly-upper off-diagonal RDM entries.

    Only meaningful in the basis diagonalizing H_sys; zero means the system
    is fully decohered relative to that basis.
    """
    if rho.basis != EIGEN_BASIS:
        raise BasisError(f"sigma requires a {EIGEN_BASIS} RDM, got {rho.basis}")
    upper = rho.matrix[np.triu_indices(rho.dim, k=1)]
    return float(np.sqrt(np.sum(np.abs(upper) ** 2)))


def _nondegenerate_pairs(es: SystemEigensystem):
    i, j = np.triu_indices(es.dim, k=1)
    keep = np.abs(es.energies[i] - es.energies[j]) > es.eps_deg
    return i[keep], j[keep]


def effective_beta(diag: np.ndarray, es: SystemEigensystem,
                   details: bool = False):
    """Effective inverse temperature fitted from the RDM diagonal.

    Averages [ln rho_ii - ln rho_jj] / (E_j - E_i) over all level pairs with
    distinct energies.  Pairs touching a floored diagonal entry (<= 1e-300,
    i.e. an unpopulated level) are excluded with a warning; if every pair is
    excluded the result is NaN.
    """
    diag = np.asarray(diag, dtype=float)
    if diag.shape != (es.dim,):
        raise ShapeMismatchError(f"diagonal of shape {diag.shape} vs dim {es.dim}")
    i, j = _nondegenerate_pairs(es)
    if len(i) == 0:
        raise UndefinedBetaError("all level pairs degenerate; b is undefined")
    ok = diag > DIAG_FLOOR
    keep = ok[i] & ok[j]
    n_excluded = int(len(i) - keep.sum())
    if n_excluded:
        warnings.warn(
            f"effective_beta: excluded {n_excluded} level pairs with "
            f"unpopulated diagonal entries",
            RuntimeWarning,
            stacklevel=2,
        )
    i, j = i[keep], j[keep]
    if len(i) == 0:
        b = math.nan
    else:
        ld = np.log(diag.clip(DIAG_FLOOR))
        b = float(np.mean((ld[i] - ld[j]) / (es.energies[j] - es.energies[i])))
    if details:
        return b, int(len(i)), n_excluded
    return b


def boltzmann_weights(energies: np.ndarray, b: float,
                      eps_deg: float = 0.0) -> np.ndarray:
    """Normalized exp(-b E) weights; b = inf is uniform on the ground levels."""
    energies = np.asarray(energies, dtype=float)
    if math.isinf(b):
        if b < 0:
            raise ValueError("b = -inf is not supported")
        ground = energies <= energies.min() + eps_deg
        return ground / ground.sum()
    shifted = energies - energies.min()
    w = np.exp(-b * shifted)
    return w / w.sum()


def delta_to_canonical(diag: np.ndarray, es: SystemEigensystem, b: float) -> float:
    """Euclidean distance between the RDM diagonal and the Boltzmann profile at b."""
    if not math.isfinite(b) and not math.isinf(b):
        raise ValueError("b must be finite or +inf")
    w = boltzmann_weights(es.energies, b, es.eps_deg)
    return float(np.sqrt(np.sum((np.asarray(diag, dtype=float) - w) ** 2)))


def canonical_rdm(es: SystemEigensystem, b: float) -> ReducedDensityMatrix:
    """The canonical reference state, diagonal in the system eigenbasis."""
    return ReducedDensityMatrix(
        np.diag(boltzmann_weights(es.energies, b, es.eps_deg)).astype(complex),
        EIGEN_BASIS,
    )


def canonical_average(es: SystemEigensystem, b: float, which: str) -> float:
    """Canonical <energy> or entropy of the system at inverse temperature b."""
    e = es.energies
    if math.isinf(b):
        g = es.ground_multiplet()
        if which == "energy":
            return float(e[g].mean())
        if which == "entropy":
            return float(math.log(len(g)))
        raise ValueError(f"unknown observable {which!r}")
    shifted = e - e.min()
    w = np.exp(-b * shifted)
    z = w.sum()
    e_mean = float((w @ e) / z)
    if which == "energy":
        return e_mean
    if which == "entropy":
        # S = b <E> + ln Z, evaluated with the overflow-safe energy shift
        return float(b * (e_mean - e.min()) + math.log(z))
    raise ValueError(f"unknown observable {which!r}")


@dataclass(frozen=True)
class SchwarzReport:
    lhs: float  # |<f>_rho - <f>_b|^2
    rhs: float  # delta^2 Tr f^2(H_sys)
    margin: float

    @property
    def ok(self) -> bool:
        return self.margin >= -1e-10


def schwarz_check(diag: np.ndarray, es: SystemEigensystem, b: float,
                  f: str = "energy") -> SchwarzReport:
    """Verify |<f>_rho - <f>_b|^2 <= delta^2 Tr f^2 for f a function of H_sys.

    Raises on violation beyond 1e-10 slack; otherwise returns the margin.
    """
    diag = np.asarray(diag, dtype=float)
    if f == "energy":
        fe = es.energies
    elif callable(f):
        fe = np.asarray(f(es.energies), dtype=float)
    else:
        raise ValueError(f"unknown f {f!r}")
    w = boltzmann_weights(es.energies, b, es.eps_deg)
    lhs = float(np.abs(diag @ fe - w @ fe) ** 2)
    delta = float(np.sqrt(np.sum((diag - w) ** 2)))
    rhs = delta**2 * float(fe @ fe)
    rep = SchwarzReport(lhs, rhs, rhs - lhs)
    if not rep.ok:
        raise NumericalConsistencyError(
            f"Schwarz bound violated: lhs {lhs:.6e} > rhs {rhs:.6e}"
        )
    return rep


def trace_distance(rho1, rho2) -> float:
    """Tr |rho1 - rho2| / 2 for Hermitian matrices of equal dimension."""
    m1 = rho1.matrix if isinstance(rho1, ReducedDensityMatrix) else np.asarray(rho1)
    m2 = rho2.matrix if isinstance(rho2, ReducedDensityMatrix) else np.asarray(rho2)
    if m1.shape != m2.shape:
        raise ShapeMismatchError(f"shape mismatch {m1.shape} vs {m2.shape}")
    diff = m1 - m2
    lam = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(lam)))


@dataclass
class DiagnosticRecord:
    """All scalar diagnostics of one sampled time point."""

    t_over_tau: float
    var: float
    entropy: float
    sigma: float
    delta: float
    b: float
    e_sys: float
    e_env: float
    e_int: float
    rdm_eigenvalues: np.ndarray


def series_header(d_s: int) -> list[str]:
    return (
        ["t_over_tau", "var", "entropy", "sigma", "delta", "b",
         "e_sys", "e_env", "e_int"]
        + [f"lambda_{i:02d}" for i in range(d_s)]
    )


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_series(records: list[DiagnosticRecord], path):
    """Stream the diagnostic records to CSV with full double precision."""
    if not records:
        raise ValueError("no records to write")
    d_s = len(records[0].rdm_eigenvalues)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(series_header(d_s)) + "\n")
        for r in records:
            row = [r.t_over_tau, r.var, r.entropy, r.sigma, r.delta, r.b,
                   r.e_sys, r.e_env, r.e_int, *r.rdm_eigenvalues]
            fh.write(",".join(format_float(x) for x in row) + "\n")
