"""Seeded low-rank test matrices and a rank-1 completion oracle."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, OracleInapplicableError


@dataclass(frozen=True)
class SynthSpec:
    m: int
    n: int
    rank: int
    low: float = 0.0
    high: float = 255.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ConfigError(f"dimensions must be positive, got {self.m}x{self.n}")
        if not 1 <= self.rank <= min(self.m, self.n):
            raise ConfigError(f"rank {self.rank} outside [1, {min(self.m, self.n)}]")
        if not self.high > self.low:
            raise ConfigError("scale upper bound must exceed the lower bound")

    @property
    def max_rank_after_rescale(self):
        # the affine rescale adds a constant matrix, which is rank one
        return min(self.rank + 1, self.m, self.n)


def low_rank_product(spec):
    """Product of seeded ``m x rank`` and ``rank x n`` standard-normal factors."""
    rng = np.random.default_rng(spec.seed)
    return rng.standard_normal((spec.m, spec.rank)) @ rng.standard_normal((spec.rank, spec.n))


def make_low_rank(spec):
    """:func:`low_rank_product` rescaled affinely to ``[spec.low, spec.high]``."""
    L = low_rank_product(spec)
    lo, hi = L.min(), L.max()
    if hi == lo:
        return np.full_like(L, spec.low)
    return spec.low + (L - lo) * ((spec.high - spec.low) / (hi - lo))


def make_rank_one(m, n, seed=0, high=255.0):
    """Nonnegative rank-1 ``a b^T`` with max entry ``high`` (scaling keeps rank one)."""
    rng = np.random.default_rng(seed)
    L = np.outer(np.abs(rng.standard_normal(m)), np.abs(rng.standard_normal(n)))
    return L * (high / L.max())


def _check_connected(mask):
    m, n = mask.shape
    rows, cols = np.nonzero(mask)
    if np.any(mask.sum(axis=1) == 0) or np.any(mask.sum(axis=0) == 0):
        raise OracleInapplicableError("a row or column has no observed entries")
    # bipartite graph: rows are nodes 0..m-1, columns m..m+n-1
    graph = coo_matrix((np.ones(rows.size), (rows, cols + m)), shape=(m + n, m + n))
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp != 1:
        raise OracleInapplicableError(f"observation graph has {n_comp} components")


def rank1_completion_oracle(M, tol=1e-12, max_iter=100000):
    """Least-squares rank-1 fit ``a b^T`` to the observed entries, by alternating
    scalar least squares, returned as the completed matrix.

    Raises
    ------
    OracleInapplicableError
        If the bipartite row/column observation graph is not connected.
    """
    mask = M.mask
    _check_connected(mask)
    D = M.data
    W = mask.astype(np.float64)
    # start from the best rank-1 approximation of the zero-filled data
    U, s, Vt = np.linalg.svd(D, full_matrices=False)
    a = U[:, 0] * np.sqrt(s[0])
    b = Vt[0] * np.sqrt(s[0])
    if not np.any(b):
        b = np.ones(D.shape[1])
    X = np.outer(a, b)
    for _ in range(max_iter):
        a = (D @ b) / (W @ (b * b))
        b = (D.T @ a) / (W.T @ (a * a))
        X_new = np.outer(a, b)
        change = np.linalg.norm(X_new - X)
        X = X_new
        if change <= tol * max(np.linalg.norm(X), 1e-300):
            break
    return X


def observed_objective(X, M):
    """Sum of squared residuals of ``X`` on the observed entries of ``M``."""
    return float(np.sum(((X - M.data)[M.mask]) ** 2))
