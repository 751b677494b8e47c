"""Exception hierarchy shared across the package.

Every error carries a short machine-parsable ``code`` so the CLI can emit
``error[CODE]: message`` on stderr and scripts can grep for it.
"""

from __future__ import annotations


class EfkError(Exception):
    """Base class for all errors raised by this package."""

    default_code = "E_GENERIC"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        self.code = code or self.default_code


class FormatError(EfkError):
    """Malformed input file (codec, annotation, config, ...).

    ``index`` locates the offending record/line when known (0-based for
    binary records, 1-based for text lines; the message says which).
    """

    default_code = "E_FORMAT"

    def __init__(self, message: str, *, code: str | None = None, index: int | None = None):
        super().__init__(message, code=code)
        self.index = index


class ShapeError(EfkError):
    """Array shape or size does not satisfy an operation's contract."""

    default_code = "E_SHAPE"


class EmptyWindowError(EfkError):
    """An operation that needs at least one event got an empty window."""

    default_code = "E_EMPTY"


class ConfigError(EfkError):
    """Invalid configuration value."""

    default_code = "E_CONFIG"


class WeightsError(EfkError):
    """Fusion weight bundle is missing tensors or has inconsistent shapes."""

    default_code = "E_WEIGHTS"


class DivergenceError(EfkError):
    """Optimizer produced a non-finite loss."""

    default_code = "E_DIVERGED"


class GeometryError(EfkError):
    """Degenerate projective geometry (singular matrix, point at infinity)."""

    default_code = "E_GEOMETRY"
