"""Exception hierarchy shared by every module."""


class HEModelError(Exception):
    """Base class for errors raised by the simulated CKKS model."""


class OutOfBudgetError(HEModelError):
    """A ciphertext ran out of multiplicative levels (a bootstrap is missing)."""


class DomainError(HEModelError, ValueError):
    """An input lies outside the interval a computation was designed for."""


class FixedPointOverflowError(HEModelError, OverflowError):
    """A slot value left the representable fixed-point range."""


class InfeasibleError(HEModelError, ValueError):
    """The requested approximation or configuration cannot be realised."""


class LayoutError(HEModelError, ValueError):
    """Packing parameters violate the layout divisibility rules."""
