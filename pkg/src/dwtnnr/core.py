"""Dense-matrix primitives, observation masks and the truncated residual gradient.

Matrices are plain 2-D float64 ``numpy`` arrays and observation masks are
boolean arrays of the same shape (``True`` marks an observed entry).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

# Tolerance used when validating orthonormality of singular vectors.
ORTHO_TOL = 1e-10


def as_matrix(X, name="matrix"):
    """Return ``X`` as a finite 2-D float64 array, raising DomainError otherwise."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DomainError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return A


def as_mask(mask, shape=None):
    """Return ``mask`` as a 2-D boolean array, optionally checking its shape."""
    B = np.asarray(mask)
    if B.ndim != 2:
        raise DomainError(f"mask must be 2-D, got shape {B.shape}")
    if B.dtype != np.bool_:
        B = B.astype(bool)
    if shape is not None and B.shape != tuple(shape):
        raise DomainError(f"mask shape {B.shape} does not match matrix shape {tuple(shape)}")
    return B


@dataclass(frozen=True)
class MaskedMatrix:
    """An observed matrix ``M_Omega`` together with its observation mask.

    ``data`` is exactly zero wherever ``mask`` is False.
    """

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        data = as_matrix(self.data, "data")
        mask = as_mask(self.mask, data.shape)
        if np.any(data[~mask] != 0):
            raise DomainError("data must be zero at unobserved positions")
        data = data.copy()
        data.flags.writeable = False
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_full(cls, M, mask):
        """Build from a full matrix by zeroing every unobserved entry."""
        M = as_matrix(M, "M")
        mask = as_mask(mask, M.shape)
        return cls(np.where(mask, M, 0.0), mask)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_observed(self):
        return int(self.mask.sum())

    @property
    def n_missing(self):
        return self.mask.size - self.n_observed


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``X = U diag(s) V^T`` with ``s = min(m, n)`` columns."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def shape(self):
        return self.U.shape[0], self.V.shape[0]

    @property
    def rank_dim(self):
        return self.s.shape[0]


@dataclass(frozen=True)
class TruncatedFactors:
    """Leading (``C``, ``D``) and trailing (``Phi``, ``Lambda``) singular vectors, row-wise."""

    r: int
    C: np.ndarray
    D: np.ndarray
    Phi: np.ndarray
    Lambda: np.ndarray

    @property
    def shape(self):
        return self.C.shape[1], self.D.shape[1]


def svd_thin(X):
    """Thin SVD of ``X`` via LAPACK ``gesdd``.

    Raises
    ------
    DomainError
        If ``X`` contains NaN or infinity.
    NumericalError
        If the SVD does not converge.
    """
    X = as_matrix(X, "X")
    try:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return SvdFactors(U=U, s=s, V=Vt.T)


def truncate(f, r):
    """Split the singular vectors of ``f`` into the leading ``r`` and the rest."""
    s = f.rank_dim
    if not 0 <= r <= s:
        raise DomainError(f"truncation count r={r} outside [0, {s}]")
    Ut = f.U.T
    Vt = f.V.T
    return TruncatedFactors(r=r, C=Ut[:r], D=Vt[:r], Phi=Ut[r:], Lambda=Vt[r:])


def residual_gradient(t):
    """Return ``Phi^T Lambda``, the sum of trailing outer products ``u_i v_i^T``.

    This equals ``A^T B - C^T D`` with ``A``, ``B`` built from a full SVD
    (``B`` zero-padded or trimmed to ``m`` rows), without forming either.
    """
    return t.Phi.T @ t.Lambda


def leading_product(t):
    """Return ``C^T D``, the sum of leading outer products."""
    return t.C.T @ t.D


def project_observed(X, M):
    """Copy ``M.data`` onto the observed entries of ``X``; keep ``X`` elsewhere."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != M.shape:
        raise DomainError(f"shape mismatch: X is {X.shape}, M is {M.shape}")
    return np.where(M.mask, M.data, X)


def nuclear_norm(X):
    """Sum of singular values of ``X``."""
    X = as_matrix(X, "X")
    try:
        s = np.linalg.svd(X, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return float(s.sum())


def trace_surrogate(X, C, D):
    """``trace(C X D^T)`` for ``C`` of shape (r, m) and ``D`` of shape (r, n)."""
    X = as_matrix(X, "X")
    C = np.asarray(C, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    m, n = X.shape
    if C.ndim != 2 or D.ndim != 2 or C.shape[1] != m or D.shape[1] != n or C.shape[0] != D.shape[0]:
        raise DomainError(
            f"incompatible shapes: X {X.shape}, C {C.shape}, D {D.shape}"
        )
    # trace(C X D^T) = sum_ij (C X)_ij D_ij
    return float(np.sum((C @ X) * D))


def full_trace_factors(X):
    """Square ``A`` (m x m) and padded/trimmed ``B`` (m x n) from a full SVD of ``X``.

    ``A = U^T``; ``B`` is ``V^T`` extended with zero rows when m > n and cut
    to its first ``m`` rows when m < n. Only used for verification; the
    solvers never materialise these.
    """
    X = as_matrix(X, "X")
    m, n = X.shape
    try:
        U, _, Vt = np.linalg.svd(X, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    A = U.T
    if m >= n:
        B = np.vstack([Vt, np.zeros((m - n, n))])
    else:
        B = Vt[:m]
    return A, B
