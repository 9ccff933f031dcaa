"""stlnav: STL-constrained navigation on semantic cost maps.

Simulation toolkit for a delivery robot that plans and executes paths under
signal temporal logic safety rules: spec parsing and quantitative
robustness, semantic cost map construction, sampling-based planning with
formal screening and repair, runtime monitoring with replanning, and test &
evaluation reporting.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionError,
    InfeasibleError,
    IrreparableError,
    SchemaError,
    SpecSyntaxError,
    StlnavError,
    TraceError,
    ValidationError,
    WorldError,
)

__all__ = [
    "__version__",
    "StlnavError",
    "SpecSyntaxError",
    "SchemaError",
    "TraceError",
    "WorldError",
    "DimensionError",
    "ValidationError",
    "InfeasibleError",
    "IrreparableError",
]
