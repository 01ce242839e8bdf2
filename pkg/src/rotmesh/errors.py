"""Exception types shared across the package."""

from __future__ import annotations


class RotmeshError(Exception):
    """Base class for package-specific errors."""


class ConfigError(RotmeshError, ValueError):
    """Invalid parameter value or flag combination."""


class EmptyInput(RotmeshError, ValueError):
    """An operation that needs data received none."""


class ParseError(RotmeshError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = str(path) if path is not None else ""
        if line is not None:
            loc = f"{loc}:{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class IoError(RotmeshError, OSError):
    """File could not be read or written."""


class UnsupportedFormat(RotmeshError, ValueError):
    """File format not recognized or not handled."""


class DegenerateProjection(RotmeshError, ValueError):
    """Direction projects to (nearly) nothing in the tangent plane."""


class DegenerateTriangle(RotmeshError, ValueError):
    """Triangle with a (nearly) zero-length side."""


class IsolatedVertex(RotmeshError, ValueError):
    """Vertex has no halfedges in the rotation system."""


class UnknownHalfedge(RotmeshError, KeyError):
    """Halfedge not present in the structure queried."""


class InconsistentState(RotmeshError, RuntimeError):
    """Internal invariant violated; indicates a bug or corrupted state."""
