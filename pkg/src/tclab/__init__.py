"""tclab: numerical audits of the linearized Taylor-Couette operator."""

from .grid import Grid, GridFunction, WeightSpec, build_grid
from .operators import OperatorKind, PhysParams, assemble

__all__ = ["Grid", "GridFunction", "OperatorKind", "PhysParams", "WeightSpec", "assemble", "build_grid"]
__version__ = "0.1.0"
