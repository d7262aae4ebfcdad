"""Row/column weights derived from how many entries each row and column is missing."""

import math
from dataclasses import dataclass

import numpy as np

from .core import as_mask
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class ObservationCounts:
    row_counts: np.ndarray
    col_counts: np.ndarray

    @property
    def shape(self):
        return len(self.row_counts), len(self.col_counts)

    @property
    def n_observed(self):
        return int(self.row_counts.sum())


@dataclass(frozen=True)
class WeightVectors:
    """Diagonals of the row weight matrix ``p`` and the column weight matrix ``q``."""

    p: np.ndarray
    q: np.ndarray
    theta1: float
    theta2: float

    @property
    def shape(self):
        return len(self.p), len(self.q)

    def apply(self, G):
        """Return ``diag(p) @ G @ diag(q)`` without forming the diagonals."""
        return self.p[:, None] * G * self.q[None, :]


def observation_counts(mask):
    mask = as_mask(mask)
    return ObservationCounts(
        row_counts=mask.sum(axis=1).astype(np.int64),
        col_counts=mask.sum(axis=0).astype(np.int64),
    )


def exponential_weights(counts, theta1=1.2, theta2=1.2):
    """Exponential weights ``p_i = exp(-theta1 (N_i / n - 1)) - 1`` (same law for ``q``).

    A fully observed row or column gets weight exactly 0; the emptiest one
    gets ``exp(theta) - 1``.
    """
    if not (theta1 > 0 and theta2 > 0):
        raise ConfigError(f"theta1 and theta2 must be positive, got {theta1}, {theta2}")
    m, n = counts.shape
    p = np.expm1(-theta1 * (counts.row_counts / n - 1.0))
    q = np.expm1(-theta2 * (counts.col_counts / m - 1.0))
    # expm1(-0.0) is -0.0; normalise so full rows/columns compare and print as 0
    p += 0.0
    q += 0.0
    return WeightVectors(p=p, q=q, theta1=float(theta1), theta2=float(theta2))


def unit_weights(m, n):
    """``p = 1``, ``q = 1``: the unweighted baseline."""
    return WeightVectors(p=np.ones(m), q=np.ones(n), theta1=0.0, theta2=0.0)


def weight_gamma(w, m, r):
    """Per-step change constant ``||P||_F (sqrt(m) + sqrt(r)) ||Q||_F``."""
    if r < 0 or r > min(w.shape):
        raise DomainError(f"r={r} outside [0, {min(w.shape)}]")
    return float(np.linalg.norm(w.p) * (math.sqrt(m) + math.sqrt(r)) * np.linalg.norm(w.q))


def weight_visualization(w, mask):
    """Matrix with ``p_i q_j`` at missing entries and 0 at observed ones."""
    mask = as_mask(mask)
    if mask.shape != w.shape:
        raise DomainError(f"mask shape {mask.shape} does not match weights {w.shape}")
    return np.where(mask, 0.0, np.outer(w.p, w.q))


def visualization_to_bytes(W):
    """Rescale ``[0, max W]`` linearly to ``[0, 255]`` as a uint8 heatmap."""
    W = np.asarray(W, dtype=np.float64)
    top = W.max() if W.size else 0.0
    if top <= 0:
        return np.zeros(W.shape, dtype=np.uint8)
    return np.floor(W / top * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
