"""Time-fractional Fokker-Planck equation with time-dependent forcing:
spectral Galerkin solvers, stability constants and verification tools."""

from .frac_core import (
    DiscreteFn,
    FracOrder,
    TimeMesh,
    frac_integral,
    gronwall_bound,
    mittag_leffler,
    rho_alpha,
    rl_derivative,
    weighted_norm_L2alpha,
)
from .spectral import (
    FunctionForcing,
    PolynomialForcing,
    SpectralBasis,
    SpectralField,
    build_basis,
    project,
)
from .solver import ProblemSpec, SingularStepError, Trajectory, solve_direct, solve_vie
from .estimates import compute_constants, check_classical_estimates, check_mild_estimates
from .estimator import FractionalFokkerPlanck

__version__ = "0.1.0"

__all__ = [
    "DiscreteFn",
    "FracOrder",
    "TimeMesh",
    "frac_integral",
    "gronwall_bound",
    "mittag_leffler",
    "rho_alpha",
    "rl_derivative",
    "weighted_norm_L2alpha",
    "FunctionForcing",
    "PolynomialForcing",
    "SpectralBasis",
    "SpectralField",
    "build_basis",
    "project",
    "ProblemSpec",
    "SingularStepError",
    "Trajectory",
    "solve_direct",
    "solve_vie",
    "compute_constants",
    "check_classical_estimates",
    "check_mild_estimates",
    "FractionalFokkerPlanck",
]
