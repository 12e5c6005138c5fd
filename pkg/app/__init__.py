"""
Calderon toolkit package.

Boundary and interior meshes, Galerkin boundary operators, the symmetric
BEM-FEM coupling for Helmholtz transmission problems and the spectral tools
that locate spurious resonances of the boundary integral operators.
"""

from .config import AppPaths, RunConfig
from .errors import CalderonError, ConfigError, NumericalError

__all__ = ["AppPaths", "CalderonError", "ConfigError", "NumericalError", "RunConfig"]
