"""Vanishing-viscosity Stefan problem laboratory on uniform 1D/2D grids."""

from .errors import ConvergenceError, NumericalError, ResolutionError, StructuralError
from .mesh import (
    Grid,
    GridFunction,
    TimePartition,
    Trajectory,
    apply_laplacian,
    bochner_norm,
    discrete_time_derivative,
    norm_Hminus1,
    norm_Lp,
    seminorm_H10,
)
from .nonlinear import AuxFunctions, Nonlinearity
from .solver import NewtonConfig, ProblemSpec, ViscosityParam, manufactured_source, solve, step
from .harness import (
    EstimateReport,
    SweepResult,
    equicontinuity_modulus,
    estimate_report,
    l1_data_sweep,
    minty_diagnostic,
    viscosity_sweep,
)

__version__ = "0.1.0"
