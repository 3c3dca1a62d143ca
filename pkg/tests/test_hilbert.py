import math

import numpy as np
import pytest

from spinbath import (
    CapacityError,
    HilbertLayout,
    ShapeMismatchError,
    StateVector,
    ZeroNormError,
    basis_state,
    combine_index,
    inner,
    normalize,
    split_index,
)
from spinbath.hilbert import product_with_environment, system_basis_index

from conftest import random_state


class TestLayout:
    def test_dimensions(self):
        lay = HilbertLayout(4, 2)
        assert (lay.d_s, lay.d_e, lay.dim) == (16, 4, 64)
        assert lay.d_s * lay.d_e == lay.dim

    def test_no_system_spin_rejected(self):
        with pytest.raises(CapacityError):
            HilbertLayout(0, 4)

    def test_capacity_ceiling(self):
        with pytest.raises(CapacityError):
            HilbertLayout(13, 12)  # 2^25 > 2^24

    def test_empty_environment_allowed(self):
        assert HilbertLayout(3, 0).dim == 8


class TestIndexArithmetic:
    def test_zero_index(self):
        assert split_index(0, HilbertLayout(4, 2)) == (0, 0)

    def test_seventeen(self):
        # 17 = 1 + 16 * 1
        assert split_index(17, HilbertLayout(4, 2)) == (1, 1)

    def test_round_trip_exhaustive_3_3(self):
        lay = HilbertLayout(3, 3)
        for k in range(lay.dim):
            i, p = split_index(k, lay)
            assert combine_index(i, p, lay) == k

    def test_round_trip_exhaustive_2_16(self):
        # vectorized version of the exhaustive round trip at the 2^16 scale
        lay = HilbertLayout(4, 12)
        k = np.arange(lay.dim)
        i, p = k % lay.d_s, k // lay.d_s
        assert np.array_equal(i + lay.d_s * p, k)

    def test_out_of_range(self):
        lay = HilbertLayout(2, 2)
        with pytest.raises(IndexError):
            split_index(16, lay)
        with pytest.raises(IndexError):
            split_index(-1, lay)
        with pytest.raises(IndexError):
            combine_index(4, 0, lay)


class TestInner:
    def test_orthonormal_basis(self):
        lay = HilbertLayout(2, 1)
        e0, e1 = basis_state(lay, 0), basis_state(lay, 1)
        assert inner(e0, e0) == 1.0
        assert inner(e0, e1) == 0.0

    def test_matches_fsum_oracle(self):
        psi = random_state(HilbertLayout(4, 4), seed=1)
        got = inner(psi, psi)
        # exactly-rounded summation oracle
        ref = math.fsum((psi.data.conj() * psi.data).real)
        assert abs(got.real - ref) < 1e-15
        assert abs(got.imag) < 1e-15

    def test_conjugate_symmetry(self):
        a = random_state(HilbertLayout(3, 3), seed=2)
        b = random_state(HilbertLayout(3, 3), seed=3)
        assert abs(inner(a, b) - np.conj(inner(b, a))) < 1e-14

    def test_layout_mismatch(self):
        a = random_state(HilbertLayout(2, 2), seed=4)
        b = random_state(HilbertLayout(4, 0), seed=5)
        with pytest.raises(ShapeMismatchError):
            inner(a, b)


class TestNormalize:
    def test_scaling(self):
        lay = HilbertLayout(2, 0)
        psi = StateVector(np.array([2.0, 0, 0, 0], dtype=complex), lay)
        out = normalize(psi)
        assert np.allclose(out.data, [1, 0, 0, 0], atol=0)

    def test_idempotent(self):
        psi = normalize(random_state(HilbertLayout(4, 2), seed=6))
        again = normalize(psi)
        assert np.max(np.abs(again.data - psi.data)) < 1e-15

    def test_random_256_dim(self):
        lay = HilbertLayout(4, 4)
        raw = StateVector(random_state(lay, seed=7).data * 37.2, lay)
        out = normalize(raw)
        ref = math.fsum((out.data.conj() * out.data).real)
        assert abs(ref - 1.0) < 1e-14

    def test_zero_vector(self):
        lay = HilbertLayout(1, 0)
        with pytest.raises(ZeroNormError):
            normalize(StateVector(np.zeros(2, dtype=complex), lay))


class TestBasisLabels:
    def test_all_up_is_index_zero(self):
        assert system_basis_index(HilbertLayout(4, 2), "all_up") == 0

    def test_neel_pattern(self):
        # |up down up down> -> down spins on bits 1 and 3 -> 0b1010
        assert system_basis_index(HilbertLayout(4, 2), "neel") == 10
        assert system_basis_index(HilbertLayout(3, 0), "neel") == 2

    def test_product_embedding(self):
        lay = HilbertLayout(2, 2)
        env = np.array([0.6, 0.0, 0.0, 0.8], dtype=complex)
        psi = product_with_environment(1, env, lay)
        assert psi.data[1] == 0.6
        assert psi.data[1 + 4 * 3] == 0.8
        assert abs(psi.norm() - 1.0) < 1e-15

    def test_bad_label(self):
        with pytest.raises(IndexError):
            system_basis_index(HilbertLayout(2, 0), 4)
        with pytest.raises(ValueError):
            system_basis_index(HilbertLayout(2, 0), "sideways")
