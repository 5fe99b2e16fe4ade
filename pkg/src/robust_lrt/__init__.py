"""Least favorable distributions and asymptotically minimax robust likelihood ratio tests.

Uncertainty classes are KL, alpha and symmetrized alpha divergence balls
around a pair of nominal densities tabulated on a uniform grid.
"""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    chernoff_exponent,
    log_mgf,
    monte_carlo_error,
    optimal_threshold,
    rate_curves,
    rate_function,
)
from .density import (  # noqa: E402
    DivergenceBall,
    Grid,
    GridDensity,
    NominalPair,
    alpha_divergence,
    divergence,
    kl_divergence,
    make_nominal,
    nominal_pair,
    sym_alpha_divergence,
    u_affinity,
)
from .errors import (  # noqa: E402
    InfeasibleParameterError,
    NumericError,
    ParameterError,
    RobustLrtError,
    SolverError,
)
from .kernels import BACKEND  # noqa: E402
from .lfd_bayes import (  # noqa: E402
    LfdSolution,
    RobustLrf,
    minimize_over_u,
    solve_alpha_lfd,
    solve_kl_lfd,
    solve_lfd,
    solve_symalpha_lfd,
    u_scan,
    verify_saddle,
)
from .lfd_np import dabak_lfds, solve_np, solve_np_type1, solve_np_type2  # noqa: E402

__all__ = [
    "BACKEND", "DivergenceBall", "Grid", "GridDensity", "InfeasibleParameterError", "LfdSolution",
    "NominalPair", "NumericError", "ParameterError", "RobustLrf", "RobustLrtError", "SolverError",
    "__version__", "alpha_divergence", "chernoff_exponent", "dabak_lfds", "divergence", "kl_divergence",
    "log_mgf", "make_nominal", "minimize_over_u", "monte_carlo_error", "nominal_pair", "optimal_threshold",
    "rate_curves", "rate_function", "solve_alpha_lfd", "solve_kl_lfd", "solve_lfd", "solve_np",
    "solve_np_type1", "solve_np_type2", "solve_symalpha_lfd", "sym_alpha_divergence", "u_affinity",
    "u_scan", "verify_saddle",
]
