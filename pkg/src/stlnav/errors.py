"""Exception hierarchy for stlnav."""


class StlnavError(Exception):
    """Base class for all stlnav errors."""


class SpecSyntaxError(StlnavError):
    """Rule text failed to parse. Carries the offending position."""

    def __init__(self, message, text=None, pos=None):
        self.text = text
        self.pos = pos
        if pos is not None:
            message = f"{message} (at column {pos})"
        super().__init__(message)


class SchemaError(StlnavError):
    """A rule references a signal or unit the schema does not declare."""


class TraceError(StlnavError):
    """Malformed trace: empty, non-uniform timestamps, or missing signals."""


class WorldError(StlnavError):
    """Malformed world file or a query outside the world bounds."""


class DimensionError(StlnavError):
    """Tensor/vector shapes do not line up."""


class ValidationError(StlnavError):
    """Scenario file failed cross-validation."""


class InfeasibleError(StlnavError):
    """No path exists within the planning budget, or an endpoint is forbidden."""


class IrreparableError(InfeasibleError):
    """Segment repair escalated to a full replan and that failed too."""
