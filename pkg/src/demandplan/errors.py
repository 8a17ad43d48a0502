"""Exception types shared across the simulator."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all simulator errors."""


class DegenerateGeometry(SimulationError):
    """Link distance below the path-loss reference distance."""


class NoCoverage(SimulationError):
    """No active station available to serve a user."""


class Unservable(SimulationError):
    """Positive rate demanded on a link with zero spectral efficiency."""


class ShapingForbidden(SimulationError):
    """Shaping requested for a demand flagged as not shapeable."""


class InvalidLoad(SimulationError):
    """Load fraction outside [0, 1]."""


class TooLargeForExhaustive(SimulationError):
    """Station count exceeds the exhaustive-search enumeration guard."""


class BackhaulCongested(SimulationError):
    """Carried demand exceeds backhaul capacity even after shaping."""


class ParseError(SimulationError):
    """Malformed input record.

    Carries the 1-based line number when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ConfigError(SimulationError):
    """Invalid experiment configuration; ``path`` points at the offending key."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
