"""Normalized inner-product geometry on R^N.

Everything in this package uses <a, b> = (1/N) sum_i a_i b_i and the induced
norm ||a|| = sqrt(<a, a>), so that {-1, 1}^N lies on the unit sphere and the
standard dot product is a . b = N <a, b>.
"""

from __future__ import annotations

import numpy as np


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized inner product <a, b> = (a . b) / N."""
    a = np.asarray(a, dtype=np.float64)
    return float(a @ b) / a.shape[-1]


def norm(a: np.ndarray) -> float:
    """Normalized norm ||a|| = |a| / sqrt(N)."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt((a @ a) / a.shape[-1]))


def inner_many(mat: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise normalized inner products of `mat` (M, N) with `v` (N,)."""
    mat = np.asarray(mat, dtype=np.float64)
    return (mat @ np.asarray(v, dtype=np.float64)) / mat.shape[-1]


def normalize(a: np.ndarray) -> np.ndarray:
    """Rescale to unit normalized norm. Raises on the zero vector."""
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return np.asarray(a, dtype=np.float64) / n


def project_off(v: np.ndarray, basis_rows: np.ndarray) -> np.ndarray:
    """Residual of v after removing components along orthonormal rows.

    `basis_rows` must be <.,.>-orthonormal; one classical step, no
    re-orthogonalization (callers that need it apply the step twice).
    """
    v = np.asarray(v, dtype=np.float64)
    if basis_rows is None or len(basis_rows) == 0:
        return v.copy()
    basis_rows = np.asarray(basis_rows, dtype=np.float64)
    coeffs = inner_many(basis_rows, v)
    return v - coeffs @ basis_rows


def orthonormal_extension(candidates, basis_rows, count, residual_tol=1e-8):
    """Gram-Schmidt candidates against `basis_rows`, keeping up to `count`.

    Each candidate is normalized first, projected off the accumulated rows
    twice (one re-orthogonalization pass), and skipped when the residual
    normalized norm falls below `residual_tol`. Returns a list of unit rows.
    """
    accepted: list[np.ndarray] = []
    rows = [np.asarray(r, dtype=np.float64) for r in basis_rows]
    for cand in candidates:
        if len(accepted) >= count:
            break
        cand = np.asarray(cand, dtype=np.float64)
        cn = norm(cand)
        if cn < 1e-14:
            continue
        v = cand / cn
        stack = np.array(rows + accepted) if (rows or accepted) else None
        r = project_off(v, stack)
        r = project_off(r, stack)
        rn = norm(r)
        if rn < residual_tol:
            continue
        accepted.append(r / rn)
    return accepted
