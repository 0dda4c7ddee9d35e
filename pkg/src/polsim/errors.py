"""Exception types shared across the simulator."""

from __future__ import annotations


class PolsimError(Exception):
    """Base class for all simulator errors."""


class ParseError(PolsimError):
    """Malformed input data (GeoJSON layer, config file, log file)."""

    def __init__(self, message: str, *, layer: str | None = None, feature: int | None = None):
        self.layer = layer
        self.feature = feature
        prefix = ""
        if layer is not None:
            prefix += f"{layer}: "
        if feature is not None:
            prefix += f"feature {feature}: "
        super().__init__(prefix + message)


class MapError(PolsimError):
    """Structurally invalid map (missing kinds, disconnected graph, ...)."""

    def __init__(self, message: str, *, components: list[int] | None = None):
        self.components = components
        if components is not None:
            message = f"{message} (component sizes: {components})"
        super().__init__(message)


class ConfigError(PolsimError):
    """Invalid run configuration."""


class RouteError(PolsimError):
    """No route between two walkway nodes."""


class InitError(PolsimError):
    """World initialization failed (map unusable for the requested run)."""


class RunError(PolsimError):
    """Runtime or I/O failure while executing a simulation run."""


class ProcError(PolsimError):
    """Log post-processing failure (schema mismatch, missing files)."""


class OrchestratorError(PolsimError):
    """Fleet orchestration failure."""
