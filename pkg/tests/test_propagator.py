import numpy as np
import pytest

from spinbath import (
    ChebyshevPlan,
    HilbertLayout,
    Part,
    PrecisionLossError,
    SpectralWindow,
    SpectralWindowError,
    StateVector,
    basis_state,
    energy_expectation,
    evolve_imag,
    evolve_real,
    explicit_couplings,
    ground_state,
    sample_couplings,
    spectral_bounds,
)
from spinbath.oracles import dense_evolve, dense_hamiltonian

from conftest import random_state


def two_level_table(splitting=1.0):
    """1+1 spins coupled by a pure z-z term: H is diagonal, levels -+ s/4."""
    delta = np.zeros((1, 1, 3))
    delta[0, 0, 2] = -splitting  # H = + splitting * S^z I^z
    return explicit_couplings(1, 1, 0.0, delta=delta)


class TestSpectralBounds:
    def test_zero_operator_window(self):
        t = sample_couplings(2, 2, 0.0, 0.0, 0.0, 0)
        w = spectral_bounds(t, Part.TOTAL)
        assert w.lo < 0.0 < w.hi
        assert w.hi <= 1e-6

    def test_window_contains_dense_spectrum(self, small_table):
        lam = np.linalg.eigvalsh(dense_hamiltonian(small_table, Part.TOTAL))
        w = spectral_bounds(small_table, Part.TOTAL)
        assert w.lo <= lam[0] and lam[-1] <= w.hi

    def test_widening_strictly_contains_estimates(self, small_table):
        w = spectral_bounds(small_table, Part.TOTAL, safety=1.05)
        assert w.lo < w.e_min and w.hi > w.e_max

    def test_iters_precondition(self, small_table):
        with pytest.raises(ValueError):
            spectral_bounds(small_table, Part.TOTAL, iters=5)


class TestChebyshevPlan:
    def test_last_coefficient_below_tolerance(self, small_table):
        w = spectral_bounds(small_table, Part.TOTAL)
        for plan in (ChebyshevPlan.real_time(w, 7.3),
                     ChebyshevPlan.imaginary_time(w, 2.0)):
            assert plan.n_terms >= 1
            assert abs(plan.coefficients[-1]) < 1e-15

    def test_t_zero_is_identity(self, small_table):
        w = spectral_bounds(small_table, Part.TOTAL)
        psi = random_state(small_table.layout, seed=1)
        out = evolve_real(psi, small_table, 0.0, window=w)
        assert np.max(np.abs(out.data - psi.data)) < 1e-14


class TestEvolveReal:
    def test_two_level_analytic_phases(self):
        t = two_level_table(splitting=1.0)
        lay = t.layout
        # basis states are H eigenstates with energies +-1/4
        psi = StateVector((basis_state(lay, 0).data
                           + basis_state(lay, 1).data) / np.sqrt(2), lay)
        h = dense_hamiltonian(t, Part.TOTAL)
        e0, e1 = h[0, 0].real, h[1, 1].real
        out = evolve_real(psi, t, 3.7)
        ref = (np.exp(-1j * e0 * 3.7) * basis_state(lay, 0).data
               + np.exp(-1j * e1 * 3.7) * basis_state(lay, 1).data) / np.sqrt(2)
        assert np.max(np.abs(out.data - ref)) < 1e-13

    def test_matches_dense_oracle_t10(self):
        table = sample_couplings(4, 4, -0.5, 0.2, 0.5, 7)
        psi = random_state(table.layout, seed=2)
        h = dense_hamiltonian(table, Part.TOTAL)
        got = evolve_real(psi, table, 10.0)
        ref = dense_evolve(h, psi.data, 10.0)
        assert np.linalg.norm(got.data - ref) < 1e-10

    def test_unitarity_long_time(self, small_table):
        psi = random_state(small_table.layout, seed=3)
        out = evolve_real(psi, small_table, 1000.0 * np.pi / 10.0)
        assert abs(out.norm() - 1.0) < 1e-12

    def test_group_property(self, small_table):
        w = spectral_bounds(small_table, Part.TOTAL)
        psi = random_state(small_table.layout, seed=4)
        a = evolve_real(evolve_real(psi, small_table, 1.3, window=w),
                        small_table, 2.9, window=w)
        b = evolve_real(psi, small_table, 4.2, window=w)
        assert np.linalg.norm(a.data - b.data) < 1e-10

    def test_forward_backward_recovers_state(self, small_table):
        psi = random_state(small_table.layout, seed=5)
        back = evolve_real(evolve_real(psi, small_table, 6.0),
                           small_table, -6.0)
        assert np.linalg.norm(back.data - psi.data) < 1e-11

    def test_energy_conservation(self, small_table):
        psi = random_state(small_table.layout, seed=6)
        e0 = energy_expectation(Part.TOTAL, small_table, psi)
        w = spectral_bounds(small_table, Part.TOTAL)
        plan = ChebyshevPlan.real_time(w, np.pi / 10.0)
        for _ in range(50):
            psi = evolve_real(psi, small_table, np.pi / 10.0, plan=plan)
        assert abs(energy_expectation(Part.TOTAL, small_table, psi) - e0) < 1e-10

    def test_window_violation_detected(self, small_table):
        psi = random_state(small_table.layout, seed=7)
        bad = SpectralWindow(-0.2, 0.2, 1.0)  # far too narrow
        with pytest.raises(SpectralWindowError):
            evolve_real(psi, small_table, 20.0, window=bad)


class TestEvolveImag:
    def test_halfbeta_zero_is_normalize(self, small_table):
        psi = random_state(small_table.layout, seed=8)
        out = evolve_imag(psi, small_table, Part.TOTAL, 0.0)
        assert np.max(np.abs(out.data - psi.data)) < 1e-14

    def test_gapped_toy_converges_to_ground(self):
        t = two_level_table(splitting=1.0)
        psi = random_state(t.layout, seed=9)
        out = evolve_imag(psi, t, Part.TOTAL, 40.0)
        h = dense_hamiltonian(t, Part.TOTAL)
        lam, vec = np.linalg.eigh(h)
        gs_overlap = 0.0
        for k in range(len(lam)):  # degenerate ground doublet
            if lam[k] < lam.min() + 1e-12:
                gs_overlap += abs(np.vdot(vec[:, k], out.data)) ** 2
        assert gs_overlap >= 1.0 - 1e-10

    def test_matches_dense_oracle_env(self):
        table = sample_couplings(2, 8, -0.5, 0.2, 0.5, 11)
        phi = random_state(HilbertLayout(8, 0), seed=10)
        got = evolve_imag(phi, table, Part.ENVIRONMENT, 3.0)  # beta = 6
        h = dense_hamiltonian(table, Part.ENVIRONMENT, "environment")
        ref = dense_evolve(h, phi.data, -3.0j)
        ref /= np.linalg.norm(ref)
        assert np.linalg.norm(got.data - ref) < 1e-10

    def test_chunked_large_beta_matches_ground(self):
        table = sample_couplings(2, 6, -0.5, 0.2, 0.5, 13)
        phi = random_state(HilbertLayout(6, 0), seed=12)
        out = evolve_imag(phi, table, Part.ENVIRONMENT, 5e3)
        e0, gs = ground_state(table, Part.ENVIRONMENT)
        assert abs(abs(np.vdot(gs.data, out.data)) - 1.0) < 1e-6

    def test_underflowing_weights_raise_precision_error(self):
        # a state with no representable weight anywhere trips the guard
        table = sample_couplings(2, 4, -0.5, 0.2, 0.5, 14)
        phi = StateVector(np.zeros(16, dtype=complex), HilbertLayout(4, 0))
        with pytest.raises(PrecisionLossError):
            evolve_imag(phi, table, Part.ENVIRONMENT, 3.0)


class TestGroundState:
    def test_ring4(self, ring4_table):
        e0, psi = ground_state(ring4_table, Part.SYSTEM)
        assert abs(e0 - (-1.0)) < 1e-10
        assert abs(psi.norm() - 1.0) < 1e-12

    def test_zero_couplings(self):
        t = sample_couplings(2, 2, 0.0, 0.0, 0.0, 0)
        e0, _ = ground_state(t, Part.TOTAL)
        assert abs(e0) < 1e-12

    def test_random_env_matches_dense(self):
        table = sample_couplings(2, 10, -0.5, 0.2, 0.5, 15)
        e0, psi = ground_state(table, Part.ENVIRONMENT)
        h = dense_hamiltonian(table, Part.ENVIRONMENT, "environment")
        lam = np.linalg.eigvalsh(h)
        assert abs(e0 - lam[0]) < 1e-9
        res = np.linalg.norm(h @ psi.data - e0 * psi.data)
        assert res < 1e-9

    def test_residual_contract(self, small_table):
        from spinbath.hamiltonian import operator_for
        e0, psi = ground_state(small_table, Part.TOTAL)
        op = operator_for(small_table, Part.TOTAL)
        assert np.linalg.norm(op.apply(psi.data) - e0 * psi.data) <= 1e-10

    def test_single_spin_zero_hamiltonian(self):
        t = sample_couplings(1, 0, -0.5, 0.0, 0.0, 0)
        e0, psi = ground_state(t, Part.SYSTEM)
        assert abs(e0) < 1e-12
        assert abs(psi.norm() - 1.0) < 1e-12
