"""Reconstruction error and PSNR scored over the missing entries only."""

import math
from dataclasses import dataclass

import numpy as np

from .core import as_mask, as_matrix
from .errors import DomainError

PEAK = 255.0


@dataclass(frozen=True)
class ChannelResiduals:
    """Per-channel ``erec`` values and missing-entry counts."""

    erec: tuple
    missing: tuple

    def __post_init__(self):
        if len(self.erec) != len(self.missing) or not self.erec:
            raise DomainError("erec and missing must be non-empty and of equal length")
        if any(e < 0 for e in self.erec) or any(t < 0 for t in self.missing):
            raise DomainError("erec values and counts must be non-negative")

    @property
    def squared_error(self):
        return float(sum(e * e for e in self.erec))

    @property
    def total_missing(self):
        return int(sum(self.missing))

    @property
    def mse(self):
        if self.total_missing == 0:
            raise DomainError("no missing entries to score")
        return self.squared_error / self.total_missing


def _check_pair(a, b, mask):
    a = as_matrix(a, "recovered")
    b = as_matrix(b, "truth")
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b, as_mask(mask, a.shape)


def erec(recovered, truth, mask):
    """Frobenius norm of ``recovered - truth`` over the missing entries."""
    recovered, truth, mask = _check_pair(recovered, truth, mask)
    return float(np.linalg.norm((recovered - truth)[~mask]))


def residuals(recovered_planes, truth_planes, mask):
    """Collect :class:`ChannelResiduals` for matching lists of channel planes."""
    if len(recovered_planes) != len(truth_planes):
        raise DomainError("channel counts differ")
    mask = as_mask(mask)
    n_missing = int((~mask).sum())
    return ChannelResiduals(
        erec=tuple(erec(x, t, mask) for x, t in zip(recovered_planes, truth_planes)),
        missing=(n_missing,) * len(truth_planes),
    )


def psnr(channels):
    """PSNR in dB from pooled squared error; ``inf`` signals a perfect reconstruction."""
    mse = channels.mse
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def relative_change(X_new, X_old, M):
    """``||X_new - X_old||_F / ||M_Omega||_F``."""
    denom = float(np.linalg.norm(M.data))
    if denom == 0:
        raise DomainError("observed data is all zero; relative change is undefined")
    return float(np.linalg.norm(np.asarray(X_new) - np.asarray(X_old))) / denom
