import math

import mpmath
import numpy as np
import pytest

from spinbath import (
    BasisError,
    HilbertLayout,
    NumericalConsistencyError,
    StateVector,
    UndefinedBetaError,
    basis_state,
    canonical_average,
    canonical_rdm,
    coherence_sigma,
    delta_to_canonical,
    effective_beta,
    eigenvalue_variance,
    entropy,
    rdm_spectrum,
    reduce_to_system,
    sample_couplings,
    schwarz_check,
    to_system_eigenbasis,
    trace_distance,
)
from spinbath.rdm import EIGEN_BASIS, ReducedDensityMatrix, SystemEigensystem
from spinbath.oracles import loop_partial_trace

from conftest import random_state


@pytest.fixture(scope="module")
def ring4_es():
    return SystemEigensystem.from_table(
        sample_couplings(4, 0, -0.5, 0.0, 0.0, 0))


def random_unitary(n, seed):
    z = (np.random.default_rng(seed).standard_normal((n, n))
         + 1j * np.random.default_rng(seed + 1).standard_normal((n, n)))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestReduce:
    def test_product_state_is_pure_projector(self):
        lay = HilbertLayout(2, 3)
        sys = random_state(HilbertLayout(2, 0), seed=1)
        env = random_state(HilbertLayout(3, 0), seed=2)
        psi = StateVector(np.kron(env.data, sys.data), lay)
        rho = reduce_to_system(psi)
        ref = np.outer(sys.data, sys.data.conj())
        assert np.max(np.abs(rho.matrix - ref)) < 1e-14

    def test_bell_state_is_maximally_mixed(self):
        lay = HilbertLayout(1, 1)
        psi = StateVector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2), lay)
        rho = reduce_to_system(psi)
        assert np.max(np.abs(rho.matrix - np.eye(2) / 2)) < 1e-15

    def test_matches_loop_oracle(self):
        lay = HilbertLayout(4, 6)
        psi = random_state(lay, seed=3)
        rho = reduce_to_system(psi)
        ref = loop_partial_trace(psi.data, lay.d_s, lay.d_e)
        assert np.max(np.abs(rho.matrix - ref)) < 1e-13

    def test_unnormalized_state_rejected(self):
        lay = HilbertLayout(2, 2)
        psi = StateVector(np.full(16, 0.5, dtype=complex), lay)
        with pytest.raises(NumericalConsistencyError):
            reduce_to_system(psi)

    def test_schmidt_symmetry(self):
        # entropy of S equals entropy of E for any pure composite state
        lay = HilbertLayout(3, 4)
        psi = random_state(lay, seed=4)
        s_sys = entropy(rdm_spectrum(reduce_to_system(psi)))
        a = psi.data.reshape(lay.d_e, lay.d_s)
        rho_env = a @ a.conj().T
        lam_env = np.sort(np.linalg.eigvalsh(rho_env))[::-1]
        s_env = entropy(lam_env.clip(0))
        assert abs(s_sys - s_env) < 1e-10


class TestEigenbasisRotation:
    def test_identity_fixed_point(self, ring4_es):
        rho = ReducedDensityMatrix(np.eye(16, dtype=complex) / 16)
        out = to_system_eigenbasis(rho, ring4_es)
        assert np.max(np.abs(out.matrix - np.eye(16) / 16)) < 1e-14
        assert out.basis == EIGEN_BASIS

    def test_trace_and_spectrum_preserved(self, ring4_es):
        psi = random_state(HilbertLayout(4, 3), seed=5)
        rho = reduce_to_system(psi)
        rot = to_system_eigenbasis(rho, ring4_es)
        assert abs(np.trace(rot.matrix) - 1.0) < 1e-12
        assert np.allclose(np.linalg.eigvalsh(rot.matrix),
                           np.linalg.eigvalsh(rho.matrix), atol=1e-12)

    def test_round_trip(self, ring4_es):
        psi = random_state(HilbertLayout(4, 2), seed=6)
        rho = reduce_to_system(psi)
        rot = to_system_eigenbasis(rho, ring4_es)
        v = ring4_es.vectors
        back = v @ rot.matrix @ v.conj().T
        assert np.max(np.abs(back - rho.matrix)) < 1e-13

    def test_wrong_basis_rejected(self, ring4_es):
        rho = ReducedDensityMatrix(np.eye(16, dtype=complex) / 16,
                                   basis=EIGEN_BASIS)
        with pytest.raises(BasisError):
            to_system_eigenbasis(rho, ring4_es)


class TestSpectrum:
    def test_pure_state(self):
        psi = random_state(HilbertLayout(3, 0), seed=7)
        rho = ReducedDensityMatrix(np.outer(psi.data, psi.data.conj()))
        lam = rdm_spectrum(rho)
        assert abs(lam[0] - 1.0) < 1e-12
        assert np.all(lam[1:] < 1e-12)

    def test_maximally_mixed(self):
        lam = rdm_spectrum(ReducedDensityMatrix(np.eye(16, dtype=complex) / 16))
        assert np.allclose(lam, 1.0 / 16, atol=1e-15)

    def test_known_spectrum_reconstructed(self):
        lam_ref = np.array([0.5, 0.3, 0.15, 0.05])
        u = random_unitary(4, seed=8)
        rho = ReducedDensityMatrix(u @ np.diag(lam_ref) @ u.conj().T)
        assert np.max(np.abs(rdm_spectrum(rho) - lam_ref)) < 1e-12


class TestVariance:
    def test_identical_spectra(self):
        lam = np.array([0.7, 0.2, 0.1])
        assert eigenvalue_variance(lam, lam) == 0.0

    def test_two_level_arithmetic(self):
        assert abs(eigenvalue_variance([1.0, 0.0], [0.5, 0.5])
                   - math.sqrt(0.5)) < 1e-15

    def test_matches_brute_force(self, rng):
        a = rng.dirichlet(np.ones(16))
        b = rng.dirichlet(np.ones(16))
        sa, sb = np.sort(a)[::-1], np.sort(b)[::-1]
        ref = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(sa, sb)))
        assert abs(eigenvalue_variance(a, b) - ref) < 1e-15


class TestEntropy:
    def test_pure_state_zero(self):
        assert entropy(np.array([1.0, 0.0, 0.0])) == 0.0

    def test_maximal_mixing_ln16(self):
        assert abs(entropy(np.full(16, 1 / 16)) - math.log(16)) < 1e-14

    def test_matches_extended_precision(self, rng):
        lam = rng.dirichlet(np.ones(16))
        ref = float(-mpmath.fsum(mpmath.mpf(x) * mpmath.log(mpmath.mpf(x))
                                 for x in lam))
        assert abs(entropy(lam) - ref) < 1e-13

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(NumericalConsistencyError):
            entropy(np.array([1.1, -0.1]))


class TestSigma:
    def test_diagonal_is_fully_decohered(self):
        rho = ReducedDensityMatrix(np.diag([0.6, 0.4]).astype(complex),
                                   basis=EIGEN_BASIS)
        assert coherence_sigma(rho) == 0.0

    def test_single_off_diagonal(self):
        rho = ReducedDensityMatrix(np.array([[0.5, 0.5], [0.5, 0.5]],
                                            dtype=complex), basis=EIGEN_BASIS)
        assert abs(coherence_sigma(rho) - 0.5) < 1e-15

    def test_matches_loop_oracle(self):
        psi = random_state(HilbertLayout(3, 3), seed=9)
        es = SystemEigensystem.from_table(
            sample_couplings(3, 0, -0.5, 0.0, 0.0, 0))
        rho = to_system_eigenbasis(reduce_to_system(psi), es)
        ref = math.sqrt(math.fsum(
            abs(rho.matrix[i, j]) ** 2
            for i in range(8) for j in range(i + 1, 8)))
        assert abs(coherence_sigma(rho) - ref) < 1e-14

    def test_wrong_basis(self):
        rho = ReducedDensityMatrix(np.eye(4, dtype=complex) / 4)
        with pytest.raises(BasisError):
            coherence_sigma(rho)


class TestEffectiveBeta:
    def test_exact_boltzmann_round_trip(self, ring4_es):
        b_true = 0.8073
        w = np.exp(-b_true * ring4_es.energies)
        w /= w.sum()
        assert abs(effective_beta(w, ring4_es) - b_true) < 1e-12

    def test_uniform_diagonal_is_infinite_temperature(self, ring4_es):
        assert abs(effective_beta(np.full(16, 1 / 16), ring4_es)) < 1e-12

    def test_all_degenerate_rejected(self):
        es = SystemEigensystem.from_table(
            sample_couplings(2, 0, 0.0, 0.0, 0.0, 0))
        with pytest.raises(UndefinedBetaError):
            effective_beta(np.full(4, 0.25), es)

    def test_unpopulated_levels_excluded_with_warning(self, ring4_es):
        diag = np.exp(-0.5 * ring4_es.energies)
        diag[3] = 0.0
        diag /= diag.sum()
        with pytest.warns(RuntimeWarning):
            b, used, excluded = effective_beta(diag, ring4_es, details=True)
        assert excluded > 0
        assert math.isfinite(b)


class TestDelta:
    def test_canonical_diagonal_gives_zero(self, ring4_es):
        w = np.exp(-1.3 * ring4_es.energies)
        w /= w.sum()
        assert delta_to_canonical(w, ring4_es, 1.3) < 1e-12

    def test_two_level_by_hand(self):
        es = SystemEigensystem(np.array([0.0, 1.0]),
                               np.eye(2, dtype=complex), 1e-9)
        diag = np.array([0.7, 0.3])
        b = 0.4
        z = 1.0 + math.exp(-b)
        ref = math.sqrt((0.7 - 1.0 / z) ** 2 + (0.3 - math.exp(-b) / z) ** 2)
        assert abs(delta_to_canonical(diag, es, b) - ref) < 1e-15


class TestCanonical:
    def test_infinite_temperature_is_maximally_mixed(self, ring4_es):
        rho = canonical_rdm(ring4_es, 0.0)
        assert np.max(np.abs(rho.matrix - np.eye(16) / 16)) < 1e-15

    def test_zero_temperature_is_ground_projector(self, ring4_es):
        rho = canonical_rdm(ring4_es, math.inf)
        lam = rdm_spectrum(rho)
        # the 4-ring ground state is non-degenerate
        assert abs(lam[0] - 1.0) < 1e-15

    def test_golden_values_at_fitted_b(self, ring4_es):
        # deterministic H_sys golden values at b = 0.807
        assert abs(canonical_average(ring4_es, 0.807, "energy")
                   - (-0.165)) < 5e-4
        assert abs(canonical_average(ring4_es, 0.807, "entropy")
                   - 2.704) < 1e-3

    def test_infinite_temperature_averages(self, ring4_es):
        assert abs(canonical_average(ring4_es, 0.0, "energy")) < 1e-14
        assert abs(canonical_average(ring4_es, 0.0, "entropy")
                   - math.log(16)) < 1e-14

    def test_ground_state_energy(self, ring4_es):
        assert abs(canonical_average(ring4_es, math.inf, "energy")
                   - (-1.0)) < 1e-12


class TestSchwarz:
    def test_canonical_diagonal_equality(self, ring4_es):
        w = np.exp(-0.9 * ring4_es.energies)
        w /= w.sum()
        rep = schwarz_check(w, ring4_es, 0.9)
        assert rep.ok
        assert rep.lhs < 1e-20

    def test_perturbed_diagonal_bound_holds(self, ring4_es, rng):
        w = np.exp(-0.9 * ring4_es.energies)
        w /= w.sum()
        for _ in range(20):
            d = w + 0.02 * rng.standard_normal(16)
            d = np.abs(d)
            d /= d.sum()
            rep = schwarz_check(d, ring4_es, 0.9)
            assert rep.ok
            # direct evaluation of both sides
            lhs = (d @ ring4_es.energies - w @ ring4_es.energies) ** 2
            assert lhs <= rep.rhs + 1e-10


class TestTraceDistance:
    def test_identical(self):
        m = np.diag([0.5, 0.5]).astype(complex)
        assert trace_distance(m, m) == 0.0

    def test_orthogonal_pure_states(self):
        a = np.diag([1.0, 0.0]).astype(complex)
        b = np.diag([0.0, 1.0]).astype(complex)
        assert abs(trace_distance(a, b) - 1.0) < 1e-15

    def test_matches_nuclear_norm_oracle(self, rng):
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        a = x @ x.conj().T
        a /= np.trace(a).real
        y = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        b = y @ y.conj().T
        b /= np.trace(b).real
        ref = 0.5 * np.linalg.svd(a - b, compute_uv=False).sum()
        assert abs(trace_distance(a, b) - ref) < 1e-12
