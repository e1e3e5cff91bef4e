"""LASSO reconstruction with structurally orthogonal measurement matrices.

Modules: ``model`` (priors, instances), ``operators`` (fast block
transforms), ``lasso`` (proximal gradient solver), ``replica`` (asymptotic
MSE), ``spectrum`` (eigenvalue laws) and ``harness`` (experiments, I/O).
"""

from .lasso import LassoConfig, LassoResult, solve
from .model import Field, ProblemInstance, SignalPrior, generate_instance
from .operators import EnsembleSpec, MeasurementOperator, build_operator
from .replica import ReplicaSolution, ReplicaSpec, solve_general, solve_type_a, solve_type_b
from .spectrum import SpectralDensity, haar_density, mp_density

__all__ = [
    "EnsembleSpec", "Field", "LassoConfig", "LassoResult", "MeasurementOperator", "ProblemInstance",
    "ReplicaSolution", "ReplicaSpec", "SignalPrior", "SpectralDensity", "build_operator",
    "generate_instance", "haar_density", "mp_density", "solve", "solve_general", "solve_type_a", "solve_type_b",
]
__version__ = "0.1.0"
