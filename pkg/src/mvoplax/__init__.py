"""Matrix-valued orthogonal polynomials of deformed Laguerre type and the
difference / differential (Toda, non-commutative Painleve III) systems
satisfied by their recursion data, with independent quadrature oracles."""

from .errors import (
    DegenerateParametersError,
    DivergentMomentError,
    IterationDivergedError,
    MvoplaxError,
    SingularMatrixError,
    SingularMomentError,
    StepFailureError,
)
from .weight import WeightSpec, dg1_weight_spec, from_json, scalar_spec

__all__ = [
    "DegenerateParametersError",
    "DivergentMomentError",
    "IterationDivergedError",
    "MvoplaxError",
    "SingularMatrixError",
    "SingularMomentError",
    "StepFailureError",
    "WeightSpec",
    "dg1_weight_spec",
    "from_json",
    "scalar_spec",
]

__version__ = "0.1.0"
