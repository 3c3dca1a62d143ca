"""spinbath: exact dynamics of a small spin system in a random spin bath.

Matrix-free spin-1/2 Hamiltonians, machine-precision Chebyshev propagation
in real and imaginary time, random thermal ("typical") initial states, and
the reduced-density-matrix diagnostics that decide whether the subsystem
relaxes to a canonical state.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BasisError,
    CapacityError,
    ConfigError,
    ConvergenceError,
    NumericalConsistencyError,
    PrecisionLossError,
    ShapeMismatchError,
    SpectralWindowError,
    SpinbathError,
    UndefinedBetaError,
    ZeroNormError,
)
from .hilbert import (  # noqa: F401
    HilbertLayout,
    StateVector,
    basis_state,
    combine_index,
    inner,
    normalize,
    split_index,
)
from .hamiltonian import (  # noqa: F401
    CouplingTable,
    Part,
    apply,
    coupling_norm_bound,
    dense_system_hamiltonian,
    energy_expectation,
    explicit_couplings,
    operator_for,
    sample_couplings,
)
from .propagator import (  # noqa: F401
    ChebyshevPlan,
    SpectralWindow,
    evolve_imag,
    evolve_real,
    ground_state,
    spectral_bounds,
)
from .typicality import (  # noqa: F401
    RandomStateSpec,
    composite_thermal_state,
    energy_scaling_study,
    env_thermal_product_state,
    gaussian_unit_vector,
    initial_state,
    sample_uniform_state,
    typicality_report,
)
from .rdm import (  # noqa: F401
    DiagnosticRecord,
    ReducedDensityMatrix,
    SystemEigensystem,
    canonical_average,
    canonical_rdm,
    coherence_sigma,
    delta_to_canonical,
    effective_beta,
    eigenvalue_variance,
    entropy,
    rdm_spectrum,
    reduce_to_system,
    schwarz_check,
    to_system_eigenbasis,
    trace_distance,
)
from .spectra import ConditionalDOS, conditional_dos, environment_spectrum  # noqa: F401
from .perturbation import (  # noqa: F401
    PerturbationReport,
    exact_composite_canonical_rdm,
    perturbation_report,
    perturbative_rdm,
    z_corrections,
)
from .harness import (  # noqa: F401
    TAU,
    RunConfig,
    RunResult,
    SummaryRow,
    dis_series,
    relaxation_time,
    run,
)
