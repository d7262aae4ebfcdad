"""Low-rank matrix completion by double weighted truncated nuclear norm regularization."""

from .core import (
    MaskedMatrix,
    SvdFactors,
    TruncatedFactors,
    nuclear_norm,
    project_observed,
    residual_gradient,
    svd_thin,
    trace_surrogate,
    truncate,
)
from .errors import (
    ConfigError,
    DomainError,
    DwtnnrError,
    NumericalError,
    OracleInapplicableError,
    ParseError,
)
from .masks import (
    MaskSpec,
    block_mask,
    diamond_mask,
    make_mask,
    mask_from_image,
    random_mask,
    triangle_mask,
)
from .solvers import (
    AdmmConfig,
    CompletionResult,
    SolverConfig,
    SolverTrace,
    iteration_lower_bound,
    solve_dwtnnr,
    solve_inner_admm,
    solve_tnnr_admm,
)
from .weights import (
    exponential_weights,
    observation_counts,
    weight_gamma,
    weight_visualization,
)

__version__ = "0.1.0"
