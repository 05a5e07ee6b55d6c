"""Matrix elements of quantum stochastic cocycles with finite-dimensional initial space."""

from .coalgebra import Coalgebra, GeneratorFunctional, convolution_cocycle, localise
from .coefficients import Coefficient, InitialMap, MatrixElementMap, StructureError
from .engines import ENGINES, solve
from .instance import Instance, SchemaError, parse_instance
from .noise import StepFunction

__all__ = [
    "Coalgebra", "Coefficient", "ENGINES", "GeneratorFunctional", "InitialMap", "Instance",
    "MatrixElementMap", "SchemaError", "StepFunction", "StructureError", "convolution_cocycle",
    "localise", "parse_instance", "solve",
]
__version__ = "0.1.0"
