"""Exception types shared across the package."""


class StrassenLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StrassenLabError):
    """A value violates the invariants of its type."""


class AlphabetMismatchError(StrassenLabError):
    """Two measures that must share an alphabet do not."""


class DimensionMismatchError(StrassenLabError):
    """Array shapes do not line up with the declared alphabets."""


class SizeGuardError(StrassenLabError):
    """A computation was refused because it would exceed an enumeration guard."""


class InfeasibleError(StrassenLabError):
    """A plan or constraint system admits no solution."""
