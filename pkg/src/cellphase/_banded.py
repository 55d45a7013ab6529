"""Tridiagonal helpers: a LAPACK-backed solver and a numba Thomas sweep.

The LAPACK route is used for one-off boundary value problems; the numba
kernels are used inside time-stepping loops where the matrix is fixed and
its forward-elimination factors can be precomputed.
"""
import numpy as np
from numba import njit
from scipy.linalg import solve_banded


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` and ``upper[i]`` multiplies
    ``x[i+1]``; ``lower[0]`` and ``upper[-1]`` are ignored.
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def thomas_factor(lower, diag, upper):
    """Precompute forward-elimination factors for :func:`thomas_apply`.

    Returns ``(a, cp, inv)`` where ``a`` is the sub-diagonal, ``cp`` the
    modified super-diagonal and ``inv`` the reciprocal pivots.
    """
    n = diag.shape[0]
    cp = np.zeros(n)
    inv = np.zeros(n)
    a = np.asarray(lower, dtype=float).copy()
    a[0] = 0.0
    denom = diag[0]
    inv[0] = 1.0 / denom
    cp[0] = upper[0] * inv[0]
    for i in range(1, n):
        denom = diag[i] - a[i] * cp[i - 1]
        if denom == 0.0:
            raise ZeroDivisionError("singular tridiagonal matrix")
        inv[i] = 1.0 / denom
        cp[i] = upper[i] * inv[i] if i < n - 1 else 0.0
    return a, cp, inv


@njit(cache=True)
def thomas_apply(a, cp, inv, d, out):
    """Solve in place using factors from :func:`thomas_factor` (``out`` may alias ``d``)."""
    n = d.shape[0]
    out[0] = d[0] * inv[0]
    for i in range(1, n):
        out[i] = (d[i] - a[i] * out[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]
