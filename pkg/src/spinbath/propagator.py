"""Chebyshev-polynomial propagation and Lanczos extremal eigenpairs.

Real-time evolution expands exp(-itH) in Chebyshev polynomials of the
Hamiltonian rescaled to [-1, 1], with Bessel-J coefficients; imaginary time
uses modified-Bessel coefficients (exponentially scaled to stay inside the
float64 range).  Both reduce to repeated matrix-free applications of H, so
accuracy is set only by the coefficient truncation (machine precision),
never by a time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import ive, jv

from .errors import (
    ConvergenceError,
    PrecisionLossError,
    SpectralWindowError,
    ZeroNormError,
)
from .hamiltonian import (
    CouplingTable,
    HamiltonianOperator,
    Part,
    _space_for_state,
    operator_for,
)
from .hilbert import HilbertLayout, StateVector, normalize

#: truncate Chebyshev series once coefficients drop below this magnitude
COEFF_TOL = 1e-15

#: keep per-chunk imaginary-time weight ratios within exp(500) of each other
_IMAG_LOG_RANGE = 500.0


@dataclass(frozen=True)
class SpectralWindow:
    """Raw extremal-eigenvalue estimates plus a widening safety factor.

    The effective window [lo, hi] used for rescaling strictly contains the
    raw estimates; all eigenvalues must lie inside it.
    """

    e_min: float
    e_max: float
    safety: float = 1.05

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ValueError(f"need e_min < e_max, got [{self.e_min}, {self.e_max}]")
        if self.safety < 1.0:
            raise ValueError("safety factor must be >= 1")

    @property
    def center(self) -> float:
        return 0.5 * (self.e_min + self.e_max)

    @property
    def halfwidth(self) -> float:
        """Widened half width actually used for rescaling."""
        return 0.5 * (self.e_max - self.e_min) * self.safety

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth


def _natural_space(table: CouplingTable, part: Part) -> str:
    if part is Part.SYSTEM:
        return "system"
    if part is Part.ENVIRONMENT and table.n_e >= 1:
        return "environment"
    return "composite"


def _lanczos_sweep(op, dim, rng, iters, reorth, start=None):
    """One Lanczos sweep; returns (alphas, betas, basis or None, start)."""
    if start is None:
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    else:
        v = start.astype(np.complex128, copy=True)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ZeroNormError("zero Lanczos start vector")
    v /= nv
    basis = [v.copy()] if reorth else None
    alphas, betas = [], []
    w = op.apply(v)
    a = float(np.vdot(v, w).real)
    alphas.append(a)
    w = w - a * v
    v_prev = v
    for _ in range(1, iters):
        if reorth:
            vb = np.column_stack(basis)
            w -= vb @ (vb.conj().T @ w)
        b = float(np.linalg.norm(w))
        scale = max(abs(a), 1.0)
        if b <= 1e-13 * scale:
            break  # invariant subspace found
        v_new = w / b
        w = op.apply(v_new)
        a = float(np.vdot(v_new, w).real)
        alphas.append(a)
        betas.append(b)
        w = w - a * v_new - b * v_prev
        v_prev = v_new
        if reorth:
            basis.append(v_new.copy())
    return np.array(alphas), np.array(betas), basis


def _lanczos_extremes(op, iters, rng):
    alphas, betas, _ = _lanczos_sweep(op, op.dim, rng, iters, reorth=False)
    if np.any(~np.isfinite(alphas)) or np.any(~np.isfinite(betas)):
        raise ConvergenceError("Lanczos produced non-finite coefficients")
    if len(alphas) == 1:
        return float(alphas[0]), float(alphas[0])
    theta = eigh_tridiagonal(alphas, betas, eigvals_only=True)
    return float(theta[0]), float(theta[-1])


def spectral_bounds(
    table: CouplingTable,
    part: Part = Part.TOTAL,
    iters: int = 100,
    seed: int = 7,
    safety: float = 1.05,
    space: str | None = None,
) -> SpectralWindow:
    """Estimate the extremal eigenvalues of one Hamiltonian part by Lanczos.

    Runs from a random start (seeded, hence reproducible) and widens the
    estimates by ``safety``.  Breakdown (an invariant Krylov subspace, e.g.
    for the zero operator) triggers up to 3 restarts with fresh vectors; the
    estimates of all sweeps are pooled.
    """
    if iters < 20:
        raise ValueError(f"need iters >= 20, got {iters}")
    op = operator_for(table, part, space or _natural_space(table, part))
    rng = np.random.default_rng(seed)
    e_min = math.inf
    e_max = -math.inf
    for attempt in range(4):
        try:
            lo, hi = _lanczos_extremes(op, min(iters, op.dim), rng)
        except ConvergenceError:
            if attempt == 3:
                raise
            continue
        e_min = min(e_min, lo)
        e_max = max(e_max, hi)
        if e_max - e_min > 1e-8:
            break
    if not (math.isfinite(e_min) and math.isfinite(e_max)):
        raise ConvergenceError("spectral bound estimation failed")
    if e_max - e_min < 2e-8:
        c = 0.5 * (e_min + e_max)
        e_min, e_max = c - 1e-8, c + 1e-8
    return SpectralWindow(e_min, e_max, safety)


@dataclass(frozen=True)
class ChebyshevPlan:
    """Truncated expansion of exp(-itH) or exp(-sH) over one window.

    ``coefficients[k]`` multiplies T_k of the rescaled operator; for
    imaginary time they are exponentially scaled (the result is renormalized
    anyway).  The last coefficient is below the truncation tolerance.
    """

    window: SpectralWindow
    kind: str  # "real" | "imag"
    duration: float  # t for real time, s = half-beta chunk for imaginary
    coefficients: np.ndarray
    prefactor: complex

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    @classmethod
    def real_time(cls, window: SpectralWindow, t: float) -> "ChebyshevPlan":
        if not math.isfinite(t):
            raise ValueError(f"non-finite propagation time {t}")
        z = t * window.halfwidth
        k_max = int(abs(z)) + int(12.0 * abs(z) ** (1.0 / 3.0)) + 45
        k = np.arange(k_max)
        coeffs = (2.0 - (k == 0)) * (-1j) ** (k % 4) * jv(k, z)
        coeffs = _trim(coeffs)
        pref = complex(np.exp(-1j * t * window.center))
        return cls(window, "real", t, coeffs, pref)

    @classmethod
    def imaginary_time(cls, window: SpectralWindow, s: float) -> "ChebyshevPlan":
        if s < 0 or not math.isfinite(s):
            raise ValueError(f"need finite s >= 0, got {s}")
        z = s * window.halfwidth
        k_max = int(z) + int(12.0 * z ** (1.0 / 3.0)) + 45
        k = np.arange(k_max)
        # scaled coefficients: sum_k c_k T_k = exp(-s (H - lo)), norm <= 1
        coeffs = (2.0 - (k == 0)) * (-1.0) ** (k % 2) * ive(k, z)
        coeffs = _trim(coeffs.astype(np.complex128))
        return cls(window, "imag", s, coeffs, 1.0 + 0.0j)


def _trim(coeffs: np.ndarray) -> np.ndarray:
    big = np.nonzero(np.abs(coeffs) >= COEFF_TOL)[0]
    if len(big) == 0:
        return coeffs[:1]
    last = int(big[-1])
    if last + 2 > len(coeffs):
        raise ConvergenceError("Chebyshev series did not decay below tolerance")
    return coeffs[: last + 2].copy()


def _chebyshev_apply(op: HamiltonianOperator, plan: ChebyshevPlan,
                     psi: np.ndarray) -> np.ndarray:
    """y = sum_k c_k T_k(Htilde) psi via the three-term recurrence."""
    c = plan.window.center
    inv_h = 1.0 / plan.window.halfwidth
    a = plan.coefficients
    prev = psi.astype(np.complex128, copy=True)  # T_0 psi
    y = a[0] * prev
    if len(a) == 1:
        y *= plan.prefactor
        return y
    cur = op.apply(prev)
    cur -= c * prev
    cur *= inv_h  # T_1 psi
    y += a[1] * cur
    scratch = np.empty_like(psi)
    for k in range(2, len(a)):
        nxt = op.apply(cur, out=scratch)
        nxt -= c * cur
        nxt *= 2.0 * inv_h
        nxt -= prev
        y += a[k] * nxt
        scratch = prev
        prev, cur = cur, nxt
        if (k & 15) == 0 and float(np.vdot(cur, cur).real) > 4.0:
            raise SpectralWindowError(
                "Chebyshev recurrence is diverging; the spectral window does "
                "not cover the spectrum - re-estimate the bounds"
            )
    if float(np.vdot(cur, cur).real) > 4.0:
        raise SpectralWindowError(
            "Chebyshev recurrence diverged; re-estimate the spectral bounds"
        )
    y *= plan.prefactor
    return y


def evolve_real(
    psi: StateVector,
    table: CouplingTable,
    t: float,
    window: SpectralWindow | None = None,
    plan: ChebyshevPlan | None = None,
) -> StateVector:
    """exp(-it H_total) psi to machine precision; norm is preserved."""
    op = operator_for(table, Part.TOTAL)
    if plan is None:
        if window is None:
            window = spectral_bounds(table, Part.TOTAL)
        plan = ChebyshevPlan.real_time(window, t)
    elif plan.kind != "real":
        raise ValueError("plan is not a real-time plan")
    return StateVector(_chebyshev_apply(op, plan, psi.data), psi.layout)


def evolve_imag(
    psi: StateVector,
    table: CouplingTable,
    part: Part,
    halfbeta: float,
    window: SpectralWindow | None = None,
) -> StateVector:
    """normalize(exp(-halfbeta H_part) psi).

    The filter is applied in equal chunks with one renormalization per chunk
    (mathematically identical to a single application, but keeps the
    exponential weight ratios representable for large beta).
    """
    if halfbeta < 0:
        raise ValueError(f"need halfbeta >= 0, got {halfbeta}")
    space = _space_for_state(table, part, psi)
    op = operator_for(table, part, space)
    if halfbeta == 0.0:
        return normalize(psi)
    if window is None:
        window = spectral_bounds(table, part, space=space)
    n_chunks = max(1, math.ceil(2.0 * halfbeta * window.halfwidth / _IMAG_LOG_RANGE))
    plan = ChebyshevPlan.imaginary_time(window, halfbeta / n_chunks)
    data = psi.data
    for _ in range(n_chunks):
        data = _chebyshev_apply(op, plan, data)
        nrm = float(np.linalg.norm(data))
        if not (nrm > 1e-250 and math.isfinite(nrm)):
            raise PrecisionLossError(
                "imaginary-time weights underflowed (beta too large); use the "
                "Lanczos ground-state preparation for beta -> inf"
            )
        data = data / nrm
    return StateVector(data, psi.layout)


def ground_state(
    table: CouplingTable,
    part: Part = Part.TOTAL,
    tol: float = 1e-10,
    seed: int = 11,
    block: int = 40,
    max_restarts: int = 80,
) -> tuple[float, StateVector]:
    """Lowest eigenpair of one Hamiltonian part by restarted Lanczos.

    The state lives in the part's natural space: (n_s, 0) for the system,
    (n_e, 0) for the environment, the composite layout otherwise.  Within a
    degenerate ground space the returned vector is an arbitrary member
    determined by the seed.
    """
    space = _natural_space(table, part)
    op = operator_for(table, part, space)
    dim = op.dim
    if dim < 2:
        raise ValueError("ground_state needs dimension >= 2")
    if space == "system":
        layout = HilbertLayout(table.n_s, 0)
    elif space == "environment":
        layout = HilbertLayout(table.n_e, 0)
    else:
        layout = table.layout
    rng = np.random.default_rng(seed)
    start = None
    e0 = math.nan
    residual = math.inf
    for _ in range(max_restarts):
        alphas, betas, basis = _lanczos_sweep(
            op, dim, rng, min(block, dim), reorth=True, start=start
        )
        if len(alphas) == 1:
            vecs = np.array([[1.0]])
            theta = alphas
        else:
            theta, vecs = eigh_tridiagonal(alphas, betas)
        v = np.column_stack(basis) @ vecs[:, 0].astype(np.complex128)
        v /= np.linalg.norm(v)
        e0 = float(theta[0])
        r = op.apply(v) - e0 * v
        residual = float(np.linalg.norm(r))
        if residual <= tol:
            return e0, StateVector(v, layout)
        start = v
    raise ConvergenceError(
        f"Lanczos ground state did not converge: residual {residual:.3e} "
        f"after {max_restarts} restarts (target {tol:.1e})"
    )
