import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_banded

from qevap.tridiag import ConstantOffDiagonalSolver, TridiagonalBreakdown, solve_tridiagonal


def _random_system(rng, n):
    lower = rng.normal(size=n) + 1j * rng.normal(size=n)
    upper = rng.normal(size=n) + 1j * rng.normal(size=n)
    diag = 4.0 + np.abs(lower) + np.abs(upper) + 1j * rng.normal(size=n)
    rhs = rng.normal(size=n) + 1j * rng.normal(size=n)
    return lower, diag, upper, rhs


def _banded(lower, diag, upper):
    n = len(diag)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 200), seed=st.integers(0, 2**31))
def test_matches_scipy_banded(n, seed):
    rng = np.random.default_rng(seed)
    lower, diag, upper, rhs = _random_system(rng, n)
    x = solve_tridiagonal(lower, diag, upper, rhs)
    ref = solve_banded((1, 1), _banded(lower, diag, upper), rhs)
    assert np.allclose(x, ref, rtol=1e-10, atol=1e-12)


def test_zero_pivot_raises():
    d = np.array([0.0, 1.0, 1.0], dtype=complex)
    o = np.ones(3, dtype=complex)
    with pytest.raises(TridiagonalBreakdown):
        solve_tridiagonal(o, d, o, np.ones(3, dtype=complex))


def test_cn_solve_matches_general_solver():
    rng = np.random.default_rng(1)
    n = 300
    a = 0.37
    w = 2 * a + 0.1 * rng.random(n)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    rhs = (1 - 1j * w) * psi
    rhs[1:] += 1j * a * psi[:-1]
    rhs[:-1] += 1j * a * psi[1:]
    off = np.full(n, -1j * a)
    ref = solve_tridiagonal(off, 1 + 1j * w, off, rhs)
    got = ConstantOffDiagonalSolver(-1j * a, 1 + 1j * w).cn_solve(psi, 1 - 1j * w, 1j * a)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-14)


def test_cn_map_is_unitary():
    # Cayley transform of a Hermitian tridiagonal matrix preserves the 2-norm
    rng = np.random.default_rng(2)
    n = 500
    a = 1.3
    w = 2 * a + rng.random(n)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    out = ConstantOffDiagonalSolver(-1j * a, 1 + 1j * w).cn_solve(psi, 1 - 1j * w, 1j * a)
    assert abs(np.linalg.norm(out) / np.linalg.norm(psi) - 1) < 1e-12
