"""Small dense linear algebra helpers.

Everything here works on float64 arrays of modest size (n <= 16).
``mat_exp`` accepts an array of times and returns a stacked result, which
is what the Gramian quadrature and the simulator need.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NotPositiveDefiniteError

SYMMETRY_RTOL = 1e-10
EIG_COND_LIMIT = 1e3


def as_square(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InvalidArgumentError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return M


def as_vector(v, n: int | None = None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise InvalidArgumentError(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise InvalidArgumentError(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("vector has non-finite entries")
    return v


def is_symmetric(M: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(M))))
    return bool(np.max(np.abs(M - M.T)) <= rtol * scale)


def mat_exp(M, t=1.0) -> np.ndarray:
    """Return ``exp(M t)``.

    ``t`` may be a scalar or an array of times; for an array of shape ``s``
    the result has shape ``s + (n, n)``.  Scalar times use Pade scaling and
    squaring; stacked times use a terminating series for nilpotent M or a
    well-conditioned eigendecomposition, falling back to Pade otherwise.
    """
    M = as_square(M)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("time argument is not finite")
    n = M.shape[0]
    if not np.any(M):
        return np.broadcast_to(np.eye(n), t.shape + M.shape).copy()
    if t.ndim == 0:
        return scipy.linalg.expm(t * M)
    if n == 1:
        return np.exp(M[0, 0] * t)[..., None, None]
    # batched fast paths; scipy's stacked expm loops in Python
    powers = [np.eye(n)]
    for _ in range(n):
        powers.append(powers[-1] @ M)
    if not np.any(powers[-1]):
        # nilpotent: the Taylor series terminates
        out = np.zeros(t.shape + M.shape)
        coef = np.ones(t.shape)
        for k in range(n):
            out += coef[..., None, None] * powers[k]
            coef = coef * t / (k + 1)
        return out
    lam, V = np.linalg.eig(M)
    if np.linalg.cond(V) < EIG_COND_LIMIT:
        Vinv = np.linalg.inv(V)
        out = (V * np.exp(t[..., None] * lam)[..., None, :]) @ Vinv
        return out.real if np.isrealobj(M) else out
    return scipy.linalg.expm(t[..., None, None] * M)


def spd_inverse(M) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    M = as_square(M)
    if not is_symmetric(M):
        raise NotPositiveDefiniteError("matrix is not symmetric")
    try:
        c = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    if np.any(np.diag(c[0]) <= 0):
        raise NotPositiveDefiniteError("non-positive pivot in Cholesky factor")
    inv = scipy.linalg.cho_solve(c, np.eye(M.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def spd_inverse_batch(Ms) -> np.ndarray:
    """Inverses of a stack (..., n, n) of symmetric positive definite matrices."""
    Ms = np.asarray(Ms, dtype=float)
    try:
        L = np.linalg.cholesky(Ms)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    Linv = np.linalg.inv(L)
    return np.swapaxes(Linv, -1, -2) @ Linv


def min_eigenvalue(M) -> float:
    """Smallest eigenvalue of a symmetric matrix, i.e. min of x'Mx over |x| = 1."""
    M = as_square(M)
    if not is_symmetric(M):
        raise InvalidArgumentError("min_eigenvalue requires a symmetric matrix")
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def frobenius(M) -> float:
    return float(np.linalg.norm(M))
