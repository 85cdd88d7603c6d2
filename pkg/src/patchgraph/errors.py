"""Exception types shared across the package."""


class PatchGraphError(Exception):
    """Base class for all domain errors raised by this package."""


class HorizonPoint(PatchGraphError):
    """A point maps to (or beyond) the horizon line under a homography."""


class DegenerateInput(PatchGraphError):
    """Geometry input too degenerate to operate on (near-zero area)."""


class ParseError(PatchGraphError):
    """Malformed input file or record."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        if field is not None:
            message = f"{message} (field '{field}')"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(PatchGraphError):
    """Structurally valid input that violates a semantic constraint."""


class OutOfOrderFrame(PatchGraphError):
    """Frame index regressed within a single camera stream."""


class UnknownNode(PatchGraphError):
    """Referenced patch id does not exist in the map/model."""


class EmptyModel(PatchGraphError):
    """finalize() called on a learning state that never saw a visit."""


class ChecksumMismatch(PatchGraphError):
    """Model was trained against a different map than the one supplied."""


class NoEligibleRoute(PatchGraphError):
    """Scenario has no route an agent class is allowed to take."""


class InfeasibleInjection(PatchGraphError):
    """Requested anomaly kind cannot be staged on this map/scenario."""
