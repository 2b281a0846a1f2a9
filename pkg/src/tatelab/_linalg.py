"""Shared dense linear algebra: symmetric LDL^T solves with pivot checks."""

from __future__ import annotations

import numpy as np
import scipy.linalg


class NearDegenerateError(RuntimeError):
    """An LDL^T pivot fell below the degeneracy threshold."""


def ldl_solve(A: np.ndarray, b: np.ndarray,
              pivot_tol: float = 1e-14) -> np.ndarray:
    """Solve the symmetric system A x = b by Bunch-Kaufman LDL^T.

    Raises NearDegenerateError when the block diagonal carries a pivot
    with magnitude below pivot_tol (smallest |eigenvalue| of a 2x2 block).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 1:
        pivot = A[0, 0]
        if abs(pivot) < pivot_tol:
            raise NearDegenerateError("near-degenerate linearization")
        return b / pivot
    lu, dblock, perm = scipy.linalg.ldl(A, lower=True)
    _check_pivots(dblock, pivot_tol)
    ltri = lu[perm]
    z = scipy.linalg.solve_triangular(ltri, b[perm], lower=True,
                                      unit_diagonal=True)
    w = _block_diag_solve(dblock, z)
    v = scipy.linalg.solve_triangular(ltri.T, w, lower=False,
                                      unit_diagonal=True)
    x = np.empty_like(v)
    x[perm] = v
    return x


def _check_pivots(dblock: np.ndarray, pivot_tol: float) -> None:
    n = dblock.shape[0]
    i = 0
    while i < n:
        if i + 1 < n and dblock[i, i + 1] != 0.0:
            evals = np.linalg.eigvalsh(dblock[i:i + 2, i:i + 2])
            pivot = min(abs(evals))
            i += 2
        else:
            pivot = abs(dblock[i, i])
            i += 1
        if pivot < pivot_tol:
            raise NearDegenerateError("near-degenerate linearization")


def _block_diag_solve(dblock: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = dblock.shape[0]
    w = np.empty_like(z)
    i = 0
    while i < n:
        if i + 1 < n and dblock[i, i + 1] != 0.0:
            w[i:i + 2] = np.linalg.solve(dblock[i:i + 2, i:i + 2], z[i:i + 2])
            i += 2
        else:
            w[i] = z[i] / dblock[i, i]
            i += 1
    return w


def solve_bordered(A: np.ndarray, c: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs subject to c^T x = 0 via the bordered system
    [[A, c], [c^T, 0]]; A may be singular with kernel spanned by c."""
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = c
    M[n, :n] = c
    b = np.concatenate([rhs, [0.0]])
    sol = ldl_solve(M, b)
    return sol[:n]
