"""sublevelkit: numerics for sublevel-set constrained minimization.

Computes the sublevel quantities alpha(rho), beta_rho(r), phi(rho), the
thresholds lambda*/gamma/delta for functional pairs (Phi, Psi) on R^n, runs
the constructive restricted-minimizer procedure, searches for multiplicity
alternatives (converging or escaping sequences of local minima), certifies
fixed points of potential operators on R^n, and solves a 1D finite-difference
semilinear elliptic problem driven by the same threshold machinery.
"""

from .engine import DEFAULT_CONFIG, MultiStartConfig
from .functionals import (
    BuiltinPair,
    BuiltinPotential,
    DomainSpec,
    FunctionalOracle,
    builtin_library,
    builtin_pair,
    builtin_potential,
    check_gradient,
    evaluate,
    probe_coercivity,
    random_convex_quadratic_pair,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .records import CriticalPointRecord
from .sublevel import MinimizeResult, SublevelProblem

__version__ = "0.1.0"

__all__ = [
    "BuiltinPair",
    "BuiltinPotential",
    "CriticalPointRecord",
    "DEFAULT_CONFIG",
    "DomainSpec",
    "FunctionalOracle",
    "KERNEL_BACKEND",
    "MinimizeResult",
    "MultiStartConfig",
    "SublevelProblem",
    "builtin_library",
    "builtin_pair",
    "builtin_potential",
    "check_gradient",
    "evaluate",
    "probe_coercivity",
    "random_convex_quadratic_pair",
    "__version__",
]
