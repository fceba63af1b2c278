"""Exception hierarchy shared by every module of the simulator."""


class PhotoGemmError(Exception):
    """Base class for all simulator errors."""


class InvalidValue(PhotoGemmError, ValueError):
    """An input value is outside the domain of an operation (NaN, inf, out-of-range slice)."""


class InvalidConfig(PhotoGemmError, ValueError):
    """A configuration parameter is outside its legal range."""


class ExponentOverflow(PhotoGemmError, OverflowError):
    """A shared or combined exponent does not fit the configured exponent field."""


class ShapeError(PhotoGemmError, ValueError):
    """Matrix operands are not conformable."""


class AlignmentError(PhotoGemmError, ValueError):
    """Operand or result streams have mismatched lengths."""


class CapacityError(PhotoGemmError, ValueError):
    """A tile job does not fit the DAC player SRAM."""


class DegenerateReference(PhotoGemmError, ZeroDivisionError):
    """A relative metric was requested against an all-zero reference."""


class FitError(PhotoGemmError, ValueError):
    """Power-law fitting received degenerate points."""
