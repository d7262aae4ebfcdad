"""Truncated-nuclear-norm completion solvers.

Two solvers share the same outer loop:

* :func:`solve_dwtnnr` takes one weighted gradient step per outer
  iteration, ``X <- P_Omega(X - (1/alpha_k) diag(p) Phi^T Lambda diag(q))``
  with ``alpha_{k+1} = rho * alpha_k``.
* :func:`solve_tnnr_admm` runs the weighted ADMM inner loop (W, X, Y
  updates) to convergence instead. Without the per-step projection of W its
  N inner steps collapse to a single gradient step whose length is the sum
  of the inverse penalties, which is what makes the first solver exact.
"""

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    MaskedMatrix,
    leading_product,
    project_observed,
    residual_gradient,
    svd_thin,
    truncate,
)
from .errors import ConfigError, DomainError, NumericalError
from .weights import (
    exponential_weights,
    observation_counts,
    unit_weights,
    weight_gamma,
)

WEIGHTINGS = ("double-weighted", "unweighted")
STOPPING_MODES = ("relative", "absolute")
TRACE_COLUMNS = ("iter", "delta", "inv_alpha", "step_bound", "elapsed_ms", "psnr")


@dataclass(frozen=True)
class SolverConfig:
    r: int = 3
    theta1: float = 1.2
    theta2: float = 1.2
    alpha1: float = 1e-4
    rho: float = 1.2
    eps: float = 1e-4
    max_iters: int = 200
    weighting: str = "double-weighted"
    stopping: str = "relative"

    def validate(self, shape=None):
        if not self.alpha1 > 0:
            raise ConfigError(f"alpha1 must be positive, got {self.alpha1}")
        if not self.rho > 1:
            raise ConfigError(f"rho must exceed 1, got {self.rho}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if self.stopping not in STOPPING_MODES:
            raise ConfigError(f"stopping must be one of {STOPPING_MODES}, got {self.stopping!r}")
        if self.weighting == "double-weighted" and not (self.theta1 > 0 and self.theta2 > 0):
            raise ConfigError("theta1 and theta2 must be positive")
        upper = min(shape) if shape is not None else self.r
        if not 1 <= self.r <= upper:
            raise ConfigError(f"r={self.r} outside [1, {upper}]")
        return self

    def inv_alpha(self, k):
        """Step length ``1/alpha_k = rho^-(k-1) / alpha1`` of outer iteration ``k``."""
        return self.rho ** (-(k - 1)) / self.alpha1


@dataclass(frozen=True)
class AdmmConfig:
    """Inner ADMM schedule; ``beta_t = mu_t`` always.

    ``mu1=None`` starts each outer iteration ``k`` at
    ``mu_1 = alpha_k * rho_inner / (rho_inner - 1)``, so the inverse
    penalties of an unbounded inner run sum to ``1/alpha_k``. An explicit
    ``mu1`` is used as-is by :func:`solve_inner_admm` and grown by the
    outer ``rho`` between outer iterations by :func:`solve_tnnr_admm`.
    ``rho_inner`` and ``inner_eps`` default to the outer ``rho`` and ``eps``.
    """

    mu1: float = None
    rho_inner: float = None
    inner_eps: float = None
    max_inner: int = 100
    project_each_step: bool = True

    def resolved(self, cfg, k):
        rho_inner = cfg.rho if self.rho_inner is None else self.rho_inner
        inner_eps = cfg.eps if self.inner_eps is None else self.inner_eps
        if self.mu1 is None:
            mu1 = rho_inner / ((rho_inner - 1.0) * cfg.inv_alpha(k))
        else:
            mu1 = self.mu1 * cfg.rho ** (k - 1)
        return replace(self, mu1=mu1, rho_inner=rho_inner, inner_eps=inner_eps)

    def validate(self):
        if self.mu1 is None or not self.mu1 > 0:
            raise ConfigError(f"mu1 must be positive, got {self.mu1}")
        if self.rho_inner is None or not self.rho_inner > 1:
            raise ConfigError(
                f"rho_inner must exceed 1 so the penalties strictly increase, got {self.rho_inner}"
            )
        if self.inner_eps is None or not self.inner_eps > 0:
            raise ConfigError(f"inner_eps must be positive, got {self.inner_eps}")
        if self.max_inner < 1:
            raise ConfigError(f"max_inner must be at least 1, got {self.max_inner}")
        return self


@dataclass
class TraceRecord:
    iter: int
    delta: float
    inv_alpha: float
    step_bound: float
    elapsed_ms: float = None
    psnr: float = None
    # not part of the CSV schema
    step_norm: float = 0.0
    change: float = 0.0
    inner_iters: int = 1


@dataclass
class SolverTrace:
    config: dict = field(default_factory=dict)
    gamma: float = 0.0
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            writer.writerow([_fmt(getattr(rec, c)) for c in TRACE_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def read_trace_csv(text):
    """Parse a trace CSV back into a list of dicts (empty cells become ``None``)."""
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append({
            k: (None if v == "" else (int(v) if k == "iter" else float(v)))
            for k, v in row.items()
        })
    return out


@dataclass
class CompletionResult:
    recovered: np.ndarray
    iterations: int
    converged: bool
    trace: SolverTrace
    inner_iterations: int = 0


def make_weights(M, cfg):
    """Weights for ``M`` under ``cfg.weighting``; computed once per solve."""
    m, n = M.shape
    if cfg.weighting == "unweighted":
        return unit_weights(m, n)
    return exponential_weights(observation_counts(M.mask), cfg.theta1, cfg.theta2)


def iteration_lower_bound(gamma, cfg):
    """Smallest ``N`` with ``gamma / alpha_N <= eps``: ``ceil(1 + ln(gamma / (alpha1 eps)) / ln rho)``."""
    if gamma < 0:
        raise DomainError(f"gamma must be non-negative, got {gamma}")
    if gamma == 0:
        return 1
    x = 1.0 + (math.log(gamma) - math.log(cfg.alpha1 * cfg.eps)) / math.log(cfg.rho)
    # shave rounding noise so an exact integer is not pushed to the next one
    return max(1, math.ceil(x - 1e-9))


def _psnr_single(X, truth, mask):
    missing = ~mask
    count = int(missing.sum())
    if count == 0:
        return None
    mse = float(np.sum((X - truth)[missing] ** 2)) / count
    return math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)


def _prepare(M, cfg):
    if not isinstance(M, MaskedMatrix):
        raise DomainError("M must be a MaskedMatrix")
    cfg.validate(M.shape)
    if M.n_observed == 0:
        raise DomainError("no observed entries; nothing to complete from")
    norm_m = float(np.linalg.norm(M.data))
    if cfg.stopping == "relative" and norm_m == 0:
        raise DomainError("observed data is all zero; relative change is undefined")
    return norm_m


def _run_outer(M, cfg, truth, record_time, step_fn, method):
    norm_m = _prepare(M, cfg)
    w = make_weights(M, cfg)
    m, _ = M.shape
    gamma = weight_gamma(w, m, cfg.r)
    header = asdict(cfg)
    header["method"] = method
    trace = SolverTrace(config=header, gamma=gamma)
    X = M.data.copy()
    if M.n_missing == 0:
        return CompletionResult(X, 0, True, trace, 0)

    start = time.perf_counter()
    converged = False
    inner_total = 0
    k = 0
    for k in range(1, cfg.max_iters + 1):
        inv_alpha = cfg.inv_alpha(k)
        try:
            factors = truncate(svd_thin(X), cfg.r)
        except NumericalError as exc:
            err = NumericalError(f"iteration {k}: {exc}", iteration=k)
            err.trace = trace
            raise err from exc
        X_star, inner = step_fn(X, factors, w, inv_alpha, k)
        X_new = project_observed(X_star, M)
        change = float(np.linalg.norm(X_new - X))
        delta = change / norm_m if norm_m > 0 else math.inf
        inner_total += inner
        trace.records.append(TraceRecord(
            iter=k,
            delta=delta,
            inv_alpha=inv_alpha,
            step_bound=gamma * inv_alpha,
            elapsed_ms=(time.perf_counter() - start) * 1e3 if record_time else None,
            psnr=_psnr_single(X_new, truth, M.mask) if truth is not None else None,
            step_norm=float(np.linalg.norm(X_star - X)),
            change=change,
            inner_iters=inner,
        ))
        X = X_new
        if cfg.stopping == "relative":
            converged = delta < cfg.eps
        else:
            converged = change <= cfg.eps
        if converged:
            break
    return CompletionResult(X, k, converged, trace, inner_total)


def solve_dwtnnr(M, cfg=None, truth=None, record_time=True):
    """Complete ``M`` with the weighted truncated-nuclear-norm gradient iteration.

    Starts from ``X_1 = M_Omega`` and stops once the relative change
    ``||X_{k+1} - X_k||_F / ||M_Omega||_F`` drops below ``cfg.eps`` (or the
    absolute change reaches ``cfg.eps`` with ``stopping="absolute"``), or
    after ``cfg.max_iters`` iterations.

    Parameters
    ----------
    M : MaskedMatrix
    cfg : SolverConfig, optional
        Defaults to ``r=3, theta1=theta2=1.2, alpha1=1e-4, rho=1.2,
        eps=1e-4, max_iters=200``.
    truth : ndarray, optional
        Ground truth; when given each trace record carries the PSNR.
    record_time : bool
        Store cumulative wall-clock milliseconds in the trace.

    Returns
    -------
    CompletionResult
    """
    cfg = cfg or SolverConfig()

    def step(X, factors, w, inv_alpha, k):
        return X - inv_alpha * w.apply(residual_gradient(factors)), 1

    return _run_outer(M, cfg, truth, record_time, step, "dwtnnr")


def _safe_inverse(v):
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = 1.0 / v[pos]
    return out


def solve_inner_admm(M, factors, w, X0, cfg):
    """Weighted ADMM for one Step-2 subproblem with fixed singular factors.

    Runs the W, X and Y updates with ``mu_{t+1} = rho_inner mu_t``,
    ``beta_t = mu_t`` and ``Y_1 = 0`` until the relative change of X drops
    below ``inner_eps`` or ``max_inner`` steps are taken. Row and column
    scalings use ``p`` for ``P^-2``, ``sqrt(p)`` for ``P^-1`` and
    ``1/sqrt(p)`` for ``P`` (0 where ``p = 0``), likewise for ``q``.

    Returns
    -------
    (ndarray, int)
        The final X (not projected onto the observations) and the number
        of inner steps taken.
    """
    cfg.validate()
    X = np.array(X0, dtype=np.float64, copy=True)
    if X.shape != M.shape or factors.shape != M.shape or w.shape != M.shape:
        raise DomainError("M, factors, weights and X0 must share one shape")
    norm_m = float(np.linalg.norm(M.data))
    scale = norm_m if norm_m > 0 else 1.0

    sqrt_p, sqrt_q = np.sqrt(w.p), np.sqrt(w.q)
    inv_sqrt_p, inv_sqrt_q = _safe_inverse(sqrt_p), _safe_inverse(sqrt_q)
    lead = w.apply(leading_product(factors))
    full = lead + w.apply(residual_gradient(factors))

    Y = np.zeros_like(X)
    mu = cfg.mu1
    t = 0
    for t in range(1, cfg.max_inner + 1):
        dual = sqrt_p[:, None] * Y * sqrt_q[None, :]
        W = X + (lead + dual) / mu
        if cfg.project_each_step:
            W = project_observed(W, M)
        X_new = W - (full + dual) / mu
        Y = Y + mu * (inv_sqrt_p[:, None] * (X_new - W) * inv_sqrt_q[None, :])
        change = float(np.linalg.norm(X_new - X)) / scale
        X = X_new
        mu *= cfg.rho_inner
        if change < cfg.inner_eps:
            break
    return X, t


def solve_tnnr_admm(M, cfg=None, inner=None, truth=None, record_time=True):
    """Two-step scheme: SVD factors of ``X_k``, then the weighted ADMM inner loop.

    ``cfg.weighting="unweighted"`` uses ``p = q = 1``. The result's
    ``inner_iterations`` counts every W/X/Y update across all outer steps.
    """
    cfg = cfg or SolverConfig()
    inner = inner or AdmmConfig()

    def step(X, factors, w, inv_alpha, k):
        return solve_inner_admm(M, factors, w, X, inner.resolved(cfg, k))

    return _run_outer(M, cfg, truth, record_time, step, "admm")
