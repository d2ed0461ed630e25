"""Small dense matrix kernel with symmetric positive-definite discipline.

Matrices are plain ``numpy`` arrays. Symmetric inputs are canonicalised by
mirroring the upper triangle, so symmetry is exact by construction; input that
is asymmetric beyond a relative 1e-9 is rejected rather than averaged, since
it almost always means a caller bug.

Positive definiteness is decided by Cholesky pivots: every pivot must exceed
``1e-12 * max(diag)``.
"""

from functools import lru_cache

import numpy as np
from scipy import linalg as sla

from .exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric

MAX_DIM = 64
SYMMETRY_RTOL = 1e-9
SPD_RTOL = 1e-12
PSD_RTOL = 1e-10


def _as_float_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if max(a.shape) > MAX_DIM:
        raise DimensionMismatch(f"{name} has shape {a.shape}; dimensions are capped at {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_rect(a, name="matrix"):
    """Validate a finite 2-D real matrix and return a float copy."""
    return _as_float_matrix(a, name)


def as_vector(v, dim=None, name="vector"):
    v = np.array(v, dtype=float).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@lru_cache(maxsize=None)
def _lower_indices(n):
    return np.tril_indices(n, -1)


def mirror_upper(a):
    """Return the symmetric matrix built from the upper triangle of ``a``."""
    out = np.array(a, dtype=float)
    lower = _lower_indices(out.shape[0])
    out[lower] = out.T[lower]
    return out


def as_symmetric(a, name="matrix"):
    """Canonical symmetric copy of ``a``.

    Raises :class:`NotSymmetric` if ``a`` departs from symmetry by more than
    ``1e-9`` relative to its largest entry.
    """
    a = _as_float_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"{name} is not symmetric")
    return mirror_upper(a)


def spd_tolerance(a):
    return SPD_RTOL * max(float(np.max(np.diag(a))), 0.0)


def cholesky(a, name="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Returns ``(a_sym, L)`` where ``a_sym`` is the canonical symmetric copy.
    """
    a = as_symmetric(a, name)
    tol = spd_tolerance(a)
    if tol <= 0.0:
        raise NotPositiveDefinite(f"{name} is not positive definite (nonpositive diagonal)")
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc
    pivots = np.diag(low) ** 2
    if np.min(pivots) <= tol:
        raise NotPositiveDefinite(
            f"{name} is not positive definite (pivot {np.min(pivots):.3e} <= {tol:.3e})"
        )
    return a, low


def is_spd(a):
    try:
        cholesky(a)
    except (NotPositiveDefinite, NotSymmetric):
        return False
    return True


def spd_solve(m, b, name="matrix"):
    """Solve ``m x = b`` for SPD ``m``; ``b`` may be a vector or a matrix."""
    m, low = cholesky(m, name)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, expected {m.shape[0]}")
    return sla.cho_solve((low, True), b)


def spd_inverse(m):
    """Inverse of an SPD matrix via its Cholesky factor."""
    m, low = cholesky(m)
    inv = sla.cho_solve((low, True), np.eye(m.shape[0]))
    return mirror_upper(inv)


def spd_inverse_sqrt(m):
    """The unique SPD matrix ``S`` with ``S.T @ S == inv(m)``.

    Uses an eigendecomposition, since the symmetric root is required (a
    Cholesky factor would also square to ``inv(m)`` but is not symmetric).
    """
    m, _ = cholesky(m)
    w, v = np.linalg.eigh(m)
    s = (v / np.sqrt(w)) @ v.T
    return mirror_upper(s)


def quadratic_minimizer(h, b):
    """Unique minimizer ``-inv(h) @ b`` of ``x.T h x + 2 b.T x + c``."""
    h = as_symmetric(h, "h")
    b = as_vector(b, h.shape[0], "b")
    return -spd_solve(h, b, "h")


def mil_inverse(a_inv, u, c_inv):
    """``inv(A + U C U.T)`` by the matrix inversion lemma.

    Takes the inverses ``a_inv`` and ``c_inv`` directly, so no n-by-n
    factorisation of ``A`` is ever formed.
    """
    a_inv, _ = cholesky(a_inv, "a_inv")
    c_inv, _ = cholesky(c_inv, "c_inv")
    u = as_rect(u, "u")
    if u.shape != (a_inv.shape[0], c_inv.shape[0]):
        raise DimensionMismatch(
            f"u has shape {u.shape}, expected {(a_inv.shape[0], c_inv.shape[0])}"
        )
    au = a_inv @ u
    inner = c_inv + u.T @ au
    correction = au @ spd_solve(inner, au.T, "inner matrix")
    return mirror_upper(a_inv - correction)


def sigma_max(a):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, ord=2))


def _check_block_grid(blocks):
    if not blocks or not all(blocks) or len({len(row) for row in blocks}) != 1:
        raise DimensionMismatch("block grid must be a nonempty rectangular list of lists")
    grid = [[np.atleast_2d(np.asarray(b, dtype=float)) for b in row] for row in blocks]
    heights = [row[0].shape[0] for row in grid]
    widths = [b.shape[1] for b in grid[0]]
    for i, row in enumerate(grid):
        for j, b in enumerate(row):
            if b.shape != (heights[i], widths[j]):
                raise DimensionMismatch(
                    f"block ({i}, {j}) has shape {b.shape}, expected {(heights[i], widths[j])}"
                )
    return grid


def assemble_blocks(blocks):
    return np.block(_check_block_grid(blocks))


def block_sigma_max_bound(blocks):
    """Upper bound ``sqrt(sum_ij sigma_max(A_ij)**2)`` on the assembled sigma_max."""
    grid = _check_block_grid(blocks)
    return float(np.sqrt(sum(sigma_max(b) ** 2 for row in grid for b in row)))


def min_eig(a):
    return float(np.linalg.eigvalsh(mirror_upper(np.asarray(a, dtype=float)))[0])


def max_eig(a):
    return float(np.linalg.eigvalsh(mirror_upper(np.asarray(a, dtype=float)))[-1])


def psd_tolerance(f):
    return PSD_RTOL * max(1.0, float(np.max(np.abs(f))) if np.size(f) else 1.0)


def is_psd(f):
    """``True`` when ``min eig(f) >= -1e-10 * max(1, max|f|)``."""
    return min_eig(f) >= -psd_tolerance(f)
