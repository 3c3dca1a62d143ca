"""Numba kernels for the matrix-free Hamiltonian application.

Every two-spin term S_a^x S_b^x + S_a^y S_b^y (with independent couplings)
connects each basis index k only to k XOR mask, where mask flips bits a and
b.  In the spin-product basis the combined flip weight is real and depends
only on whether bits a and b of k agree:

    equal bits   (up-up / down-down):  (c_x - c_y) / 4
    unequal bits (up-down / down-up):  (c_x + c_y) / 4

with c_x, c_y the full signed coefficients of S^x S^x and S^y S^y.  All z-z
terms are diagonal and pre-summed into a single real diagonal array.  The
whole Hamiltonian is therefore real symmetric.

The gather form below writes out[k] from one thread only, so the result is
bitwise deterministic for any thread count.
"""

import numba
import numpy as np
from numba import njit, prange


@njit(
    "void(complex128[::1], float64[::1], int64[::1], int64[::1], int64[::1],"
    " float64[::1], float64[::1], complex128[::1])",
    parallel=True,
    fastmath=True,
    cache=True,
)
def apply_terms(psi, diag, mask, shift_a, shift_b, w_equal, w_diff, out):
    n_pairs = mask.shape[0]
    for k in prange(psi.shape[0]):
        acc = diag[k] * psi[k]
        for p in range(n_pairs):
            # 1 when bits a and b of k differ, 0 when they agree
            neq = ((k >> shift_a[p]) ^ (k >> shift_b[p])) & 1
            w = w_equal[p] + neq * (w_diff[p] - w_equal[p])
            acc += w * psi[k ^ mask[p]]
        out[k] = acc
    return


def set_thread_cap(n: int):
    """Cap kernel parallelism (used for the SPINBATH_THREADS env override)."""
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
