"""Exception types shared across the package."""


class CoalgError(Exception):
    """Base class for all workbench errors."""


class EnumerationTooLarge(CoalgError):
    """An enumeration would exceed the configured cardinality cap."""


class ShapeError(CoalgError):
    """A value does not match the shape prescribed by a functor expression.

    Carries the path to the offending subvalue, e.g. "pair.1.set[2]".
    """

    def __init__(self, message, path=""):
        super().__init__(f"{message} (at {path or 'root'})")
        self.path = path


class SortError(CoalgError):
    """A formula is not well-sorted against a functor expression."""

    def __init__(self, message, path=""):
        super().__init__(f"{message} (at {path or 'root'})")
        self.path = path


class ParseError(CoalgError):
    """Malformed concrete syntax. Carries position information when known."""

    def __init__(self, message, pos=None):
        if pos is not None:
            message = f"{message} (column {pos + 1})"
        super().__init__(message)
        self.pos = pos


class FunctorMismatch(CoalgError):
    """Two objects that must share a functor expression do not."""


class CapExceeded(CoalgError):
    """A structural size cap (carrier, generators, ...) was exceeded."""


class Cancelled(CoalgError):
    """An expensive enumeration was interrupted by a cancellation check."""
