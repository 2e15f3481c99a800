"""Dense factorization kernels used by the geometric operations."""
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, RankDeficient

EPS = 2.0 ** -52


class SvdFactors(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def as_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def thin_svd(A):
    """Thin SVD ``A = U diag(S) V^T`` with ``s = min(m, n)`` singular triplets."""
    A = as_matrix(A)
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return SvdFactors(U, S, Vt.T)


def rank_threshold(S, shape):
    if S.size == 0:
        return 0.0
    return max(shape) * EPS * S[0]


def numerical_rank(A=None, svd=None):
    """Count singular values above ``max(m, n) * eps * sigma_1``."""
    if svd is None:
        svd = thin_svd(A)
    shape = (svd.U.shape[0], svd.V.shape[0])
    S = svd.S
    if S.size == 0 or S[0] == 0.0:
        return 0
    return int(np.count_nonzero(S > rank_threshold(S, shape)))


def truncate_rank(A, k):
    """Best rank-<=k approximation of ``A`` in the Frobenius norm."""
    A = as_matrix(A)
    if not 0 <= k <= min(A.shape):
        raise InvalidInput(f"rank {k} out of range for shape {A.shape}")
    if k == min(A.shape):
        return A.copy()
    if k == 0:
        return np.zeros_like(A)
    U, S, V = thin_svd(A)
    return (U[:, :k] * S[:k]) @ V[:, :k].T


def polar_factor(L):
    """Orthonormal polar factor ``L (L^T L)^{-1/2}`` of a full column rank matrix."""
    L = as_matrix(L, "L")
    if L.shape[1] == 0:
        return L.copy()
    if L.shape[1] > L.shape[0]:
        raise RankDeficient("polar factor needs at least as many rows as columns")
    U, S, Vt = np.linalg.svd(L, full_matrices=False)
    if S[-1] <= 1e-12 * S[0]:
        raise RankDeficient(f"matrix is numerically rank deficient (sigma_min={S[-1]:.3e})")
    return U @ Vt


def qr_orthonormalize(A):
    """Orthonormal basis of the column space of ``A`` with a positive R diagonal."""
    A = as_matrix(A)
    if A.shape[1] > A.shape[0]:
        raise RankDeficient("more columns than rows")
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    scale = np.abs(d).max() if d.size else 0.0
    if d.size and (scale == 0.0 or np.abs(d).min() <= 1e-12 * scale):
        raise RankDeficient("columns are linearly dependent")
    return Q * np.where(d < 0, -1.0, 1.0)


def sym_part(M):
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise InvalidInput(f"sym_part needs a square matrix, got {M.shape}")
    return 0.5 * (M + M.T)


def spd_power(M, power):
    """Power of a symmetric positive definite matrix through its eigendecomposition."""
    w, Q = np.linalg.eigh(0.5 * (M + M.T))
    if w.size and w[0] <= 0:
        raise RankDeficient("matrix is not positive definite")
    return (Q * w ** power) @ Q.T
