"""Free boundary formulation solvers for BVPs on semi-infinite intervals."""

from .errors import (
    FreeBoundaryCollapse,
    IntegrationDiverged,
    MaxIterationsExceeded,
    NewtonStagnation,
    SingularSystem,
    SolverError,
    StepLimitExceeded,
)
from .estimator import FreeBoundarySolver
from .fbf import FreeBvp, NormalizedBvp, denormalize, formulate, normalize
from .integrate import IvpOptions, Trajectory, integrate
from .kellerbox import BoxMesh, RefinementStudy, refinement_study, solve_box
from .newton import NewtonOptions
from .problems import BUILTIN_NAMES, ClosedFormSolution, ProblemSpec, builtin
from .shoot import default_guess, shooting_residual, solve_shoot
from .solution import SolutionGrid
from .sweep import SweepReport, check_golden_rule, estimate_order, run_sweep

__all__ = [
    "BUILTIN_NAMES",
    "BoxMesh",
    "ClosedFormSolution",
    "FreeBoundaryCollapse",
    "FreeBoundarySolver",
    "FreeBvp",
    "IntegrationDiverged",
    "IvpOptions",
    "MaxIterationsExceeded",
    "NewtonOptions",
    "NewtonStagnation",
    "NormalizedBvp",
    "ProblemSpec",
    "RefinementStudy",
    "SingularSystem",
    "SolutionGrid",
    "SolverError",
    "StepLimitExceeded",
    "SweepReport",
    "Trajectory",
    "builtin",
    "check_golden_rule",
    "default_guess",
    "denormalize",
    "estimate_order",
    "formulate",
    "integrate",
    "normalize",
    "refinement_study",
    "run_sweep",
    "shooting_residual",
    "solve_box",
    "solve_shoot",
]

__version__ = "0.1.0"
