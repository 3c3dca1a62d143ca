"""Random "typical" pure states and their statistical guarantees.

A uniform random state on the Hilbert-space hypersphere, filtered by
exp(-beta H / 2) and renormalized, reproduces canonical expectation values
with an error that vanishes as the inverse square root of the Hilbert-space
dimension.  This module builds the initial states used by the dynamics
(product of a system basis state with a thermal environment state, or a
thermal state of the full composite) and quantifies the single-sample
statistics behind them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .hamiltonian import CouplingTable, Part, operator_for, sample_couplings
from .hilbert import (
    HilbertLayout,
    StateVector,
    basis_state,
    normalize,
    product_with_environment,
    system_basis_index,
)
from .propagator import evolve_imag, ground_state

STATE_KINDS = (
    "uniform_sphere",
    "env_thermal_product",
    "composite_thermal",
    "all_up",
    "neel_system",
)

_THERMAL_KINDS = ("env_thermal_product", "composite_thermal")


@dataclass(frozen=True)
class RandomStateSpec:
    """Recipe for one initial state; round-trips through the run manifest.

    ``beta`` must be present exactly for the thermal kinds (math.inf encodes
    the ground-state preparation).  ``system_init`` labels the system factor
    of the product kind: "neel", "all_up" or a basis index.
    """

    kind: str
    seed: int = 0
    beta: float | None = None
    system_init: object = "neel"

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ConfigError(f"unknown initial-state kind {self.kind!r}")
        if self.kind in _THERMAL_KINDS:
            if self.beta is None or (not math.isinf(self.beta) and self.beta < 0):
                raise ConfigError(f"kind {self.kind!r} needs beta >= 0 (or inf)")
        elif self.beta is not None:
            raise ConfigError(f"kind {self.kind!r} does not take a beta")

    def to_dict(self) -> dict:
        beta = self.beta
        if beta is not None and math.isinf(beta):
            beta = "inf"
        return {"kind": self.kind, "seed": self.seed, "beta": beta,
                "system_init": self.system_init}

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomStateSpec":
        beta = doc.get("beta")
        if beta == "inf":
            beta = math.inf
        return cls(kind=doc["kind"], seed=int(doc.get("seed", 0)), beta=beta,
                   system_init=doc.get("system_init", "neel"))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gaussian_unit_vector(dim: int, rng) -> np.ndarray:
    """Unit vector with the uniform density on the (2*dim-1)-hypersphere.

    Draws the 2*dim reals as interleaved pairs x_1, y_1, ..., x_dim, y_dim
    of standard Gaussians (c_n = x_n + i y_n) and normalizes; rotation
    invariance of i.i.d. Gaussians makes the direction exactly uniform.
    """
    if dim < 1:
        raise ValueError(f"need dim >= 1, got {dim}")
    z = _as_rng(rng).standard_normal(2 * dim)
    c = z[0::2] + 1j * z[1::2]
    return c / np.linalg.norm(c)


def sample_uniform_state(layout: HilbertLayout, seed) -> StateVector:
    """Uniform random state of the composite register."""
    return StateVector(gaussian_unit_vector(layout.dim, _as_rng(seed)), layout)


def env_thermal_product_state(
    table: CouplingTable,
    beta: float,
    system_init="neel",
    seed=0,
    window=None,
) -> StateVector:
    """|S> (x) exp(-beta H_env / 2)|Phi_env> / norm, the product initial state.

    The environment factor starts from a uniform random state in the
    spin-product basis; beta = inf switches to the Lanczos ground state of
    H_env.  The system factor is the basis state labelled by
    ``system_init``.
    """
    lay = table.layout
    sys_idx = system_basis_index(lay, system_init)
    rng = _as_rng(seed)
    if lay.d_e == 1:
        env = np.ones(1, dtype=np.complex128)
    elif math.isinf(beta):
        _, gs = ground_state(table, Part.ENVIRONMENT,
                             seed=int(rng.integers(2**63)))
        env = gs.data
    else:
        phi = StateVector(gaussian_unit_vector(lay.d_e, rng),
                          HilbertLayout(table.n_e, 0))
        env = evolve_imag(phi, table, Part.ENVIRONMENT, 0.5 * beta,
                          window=window).data
    return normalize(product_with_environment(sys_idx, env, lay))


def composite_thermal_state(
    table: CouplingTable, beta: float, seed=0, window=None
) -> StateVector:
    """exp(-beta H / 2)|Phi> / norm with the FULL Hamiltonian of S+E."""
    rng = _as_rng(seed)
    if math.isinf(beta):
        _, gs = ground_state(table, Part.TOTAL, seed=int(rng.integers(2**63)))
        return gs
    phi = sample_uniform_state(table.layout, rng)
    return evolve_imag(phi, table, Part.TOTAL, 0.5 * beta, window=window)


def initial_state(spec: RandomStateSpec, table: CouplingTable) -> StateVector:
    """Materialize a RandomStateSpec for a given model."""
    lay = table.layout
    if spec.kind == "uniform_sphere":
        return sample_uniform_state(lay, spec.seed)
    if spec.kind == "env_thermal_product":
        return env_thermal_product_state(table, spec.beta, spec.system_init,
                                         spec.seed)
    if spec.kind == "composite_thermal":
        return composite_thermal_state(table, spec.beta, spec.seed)
    if spec.kind == "all_up":
        return basis_state(lay, 0)
    if spec.kind == "neel_system":
        # alternating system spins, environment all up
        return basis_state(lay, system_basis_index(lay, "neel"))
    raise ConfigError(f"unknown initial-state kind {spec.kind!r}")


@dataclass
class TypicalityReport:
    """Single-sample statistics of thermal-state expectation values."""

    part: str
    observable: str
    beta: float
    dim: int
    estimates: np.ndarray = field(repr=False)
    exact: float
    x2_values: np.ndarray = field(repr=False)
    x2_bound: float  # theoretical <X^2> bound, 1/dim^2
    markov_threshold: float  # 1/dim
    violation_fraction: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def spread(self) -> float:
        return float(np.std(self.estimates))

    def to_json_dict(self) -> dict:
        return {
            "part": self.part,
            "observable": self.observable,
            "beta": self.beta,
            "dim": self.dim,
            "n_samples": int(len(self.estimates)),
            "estimates": self.estimates.tolist(),
            "mean": self.mean,
            "spread": self.spread,
            "exact": self.exact,
            "x2_mean": float(np.mean(self.x2_values)),
            "x2_bound": self.x2_bound,
            "markov_threshold": self.markov_threshold,
            "violation_fraction": self.violation_fraction,
        }


def typicality_report(
    table: CouplingTable,
    part: Part = Part.ENVIRONMENT,
    observable: str = "energy",
    beta: float = 0.0,
    n_samples: int = 1,
    seed=0,
) -> TypicalityReport:
    """Sample thermal-filtered random states and report estimator statistics.

    For each sample the report records the expectation estimate
    <Phi(beta/2)|X|Phi(beta/2)>, the normalization fluctuation
    X = 1/D - sum_j |d_j|^2 p_j whose second moment is bounded by 1/D^2,
    and the empirical fraction of samples with X^2 >= 1/D (Markov's
    inequality makes that fraction < 1/D in expectation).

    Dense diagonalization of the part keeps every quantity exact; this is a
    desk-scale validation tool, not a production path.
    """
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    if not math.isfinite(beta) or beta < 0:
        raise ValueError(f"need finite beta >= 0, got {beta}")
    if observable not in ("energy", "identity"):
        raise ValueError(f"unknown observable {observable!r}")
    op = operator_for(table, part,
                      "environment" if part is Part.ENVIRONMENT else
                      ("system" if part is Part.SYSTEM else "composite"))
    energies, vectors = np.linalg.eigh(op.dense())
    dim = op.dim
    shifted = energies - energies.min()
    pw = np.exp(-beta * shifted)
    p = pw / pw.sum()
    f = energies if observable == "energy" else np.ones(dim)
    exact = float(p @ f)
    rng = _as_rng(seed)
    estimates = np.empty(n_samples)
    x2 = np.empty(n_samples)
    for s in range(n_samples):
        d = vectors.conj().T @ gaussian_unit_vector(dim, rng)
        amp2 = np.abs(d) ** 2 * np.exp(-beta * shifted)
        a2 = amp2 / amp2.sum()
        estimates[s] = a2 @ f
        x2[s] = (1.0 / dim - float(np.abs(d) ** 2 @ p)) ** 2
    return TypicalityReport(
        part=part.value,
        observable=observable,
        beta=beta,
        dim=dim,
        estimates=estimates,
        exact=exact,
        x2_values=x2,
        x2_bound=1.0 / dim**2,
        markov_threshold=1.0 / dim,
        violation_fraction=float(np.mean(x2 >= 1.0 / dim)),
    )


@dataclass
class ScalingStudy:
    """Typicality error versus environment size, with the fitted exponent."""

    n_e: list
    dims: list
    rms_errors: list
    slope: float

    def to_json_dict(self) -> dict:
        return {"n_e": list(self.n_e), "dims": list(self.dims),
                "rms_errors": list(self.rms_errors), "slope": self.slope}


def energy_scaling_study(
    n_e_list=(6, 8, 10, 12),
    beta: float = 1.0,
    omega_bound: float = 0.5,
    n_samples: int = 40,
    seed: int = 0,
) -> ScalingStudy:
    """Measure how the thermal-state energy estimate improves with bath size.

    For each environment size a fresh all-to-all model is drawn and
    ``n_samples`` independent thermal states are prepared; the RMS deviation
    of the single-sample energy estimate from the exact canonical average,
    in units of the canonical energy spread, is fitted against the Hilbert
    dimension.  The fitted log-log slope converges to -1/2.
    """
    root = np.random.SeedSequence(seed)
    rms = []
    dims = []
    for n_e, child in zip(n_e_list, root.spawn(len(n_e_list))):
        cseed = int(child.generate_state(1)[0])
        table = sample_couplings(1, n_e, 0.0, 0.0, omega_bound, cseed)
        op = operator_for(table, Part.ENVIRONMENT, "environment")
        energies, vectors = np.linalg.eigh(op.dense())
        shifted = energies - energies.min()
        p = np.exp(-beta * shifted)
        p /= p.sum()
        exact = float(p @ energies)
        scale = float(np.sqrt(p @ energies**2 - exact**2))
        rng = np.random.default_rng(cseed ^ 0x5EED)
        errs = np.empty(n_samples)
        for s in range(n_samples):
            d = vectors.conj().T @ gaussian_unit_vector(op.dim, rng)
            amp2 = np.abs(d) ** 2 * np.exp(-beta * shifted)
            errs[s] = (amp2 @ energies) / amp2.sum() - exact
        rms.append(float(np.sqrt(np.mean(errs**2))) / scale)
        dims.append(op.dim)
    slope = float(np.polyfit(np.log(dims), np.log(rms), 1)[0])
    return ScalingStudy(list(n_e_list), dims, rms, slope)
