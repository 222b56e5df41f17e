"""Complex tridiagonal solvers for the Crank-Nicolson kernel.

Two entry points: a general Thomas elimination for arbitrary bands, and a
pre-factored form used when the left-hand matrix is constant across steps
(static potentials), which avoids redoing the forward sweep coefficients.
"""

from __future__ import annotations

import numpy as np
from numba import njit


class TridiagonalBreakdown(ArithmeticError):
    """Raised when elimination meets a vanishing pivot."""


_PIVOT_FLOOR = 1e-300


@njit(cache=True)
def _thomas(lower, diag, upper, rhs, out):
    n = diag.shape[0]
    cp = np.empty(n, dtype=np.complex128)
    dp = np.empty(n, dtype=np.complex128)
    piv = diag[0]
    if abs(piv) < _PIVOT_FLOOR:
        return False
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if abs(piv) < _PIVOT_FLOOR:
            return False
        cp[i] = upper[i] / piv if i < n - 1 else 0.0j
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return True


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``A x = rhs`` for tridiagonal ``A`` in O(n).

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` unused) and
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused).
    """
    diag = np.ascontiguousarray(diag, dtype=np.complex128)
    n = diag.shape[0]
    lower = np.ascontiguousarray(np.broadcast_to(lower, (n,)), dtype=np.complex128)
    upper = np.ascontiguousarray(np.broadcast_to(upper, (n,)), dtype=np.complex128)
    rhs = np.ascontiguousarray(rhs, dtype=np.complex128)
    out = np.empty(n, dtype=np.complex128)
    if not _thomas(lower, diag, upper, rhs, out):
        raise TridiagonalBreakdown("zero pivot in tridiagonal elimination")
    return out


@njit(cache=True)
def _factor_const_off(off, diag, cp, inv):
    n = diag.shape[0]
    piv = diag[0]
    if abs(piv) < _PIVOT_FLOOR:
        return False
    inv[0] = 1.0 / piv
    cp[0] = off * inv[0]
    for i in range(1, n):
        piv = diag[i] - off * cp[i - 1]
        if abs(piv) < _PIVOT_FLOOR:
            return False
        inv[i] = 1.0 / piv
        cp[i] = off * inv[i]
    return True


@njit(cache=True)
def _cn_apply(psi, rhs_diag, coupling, off, cp, inv, out):
    # rhs = rhs_diag * psi + coupling * (psi[i-1] + psi[i+1]), Dirichlet zeros
    # outside; forward substitution fused with the rhs build, then back-substitution.
    n = psi.shape[0]
    if n == 1:
        out[0] = rhs_diag[0] * psi[0] * inv[0]
        return
    prev = (rhs_diag[0] * psi[0] + coupling * psi[1]) * inv[0]
    out[0] = prev
    for i in range(1, n - 1):
        r = rhs_diag[i] * psi[i] + coupling * (psi[i - 1] + psi[i + 1])
        prev = (r - off * prev) * inv[i]
        out[i] = prev
    r = rhs_diag[n - 1] * psi[n - 1] + coupling * psi[n - 2]
    out[n - 1] = (r - off * prev) * inv[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = out[i] - cp[i] * out[i + 1]


class ConstantOffDiagonalSolver:
    """Pre-factored solver for ``A`` with constant off-diagonal ``off``.

    The Crank-Nicolson left matrix has this structure: the kinetic coupling
    is uniform and only the diagonal carries the potential.
    """

    def __init__(self, off: complex, diag: np.ndarray):
        diag = np.ascontiguousarray(diag, dtype=np.complex128)
        self.n = diag.shape[0]
        self.off = complex(off)
        self.cp = np.empty(self.n, dtype=np.complex128)
        self.inv = np.empty(self.n, dtype=np.complex128)
        if not _factor_const_off(self.off, diag, self.cp, self.inv):
            raise TridiagonalBreakdown("zero pivot while factoring Crank-Nicolson matrix")

    def cn_solve(self, psi: np.ndarray, rhs_diag: np.ndarray, coupling: complex) -> np.ndarray:
        """Build the explicit half-step right-hand side from ``psi`` and solve."""
        out = np.empty(self.n, dtype=np.complex128)
        _cn_apply(psi, rhs_diag, complex(coupling), self.off, self.cp, self.inv, out)
        return out
