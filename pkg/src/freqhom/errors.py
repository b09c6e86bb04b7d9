"""Exception hierarchy shared by all freqhom modules."""


class FreqhomError(Exception):
    """Base class for every error raised by the toolkit."""


class OutOfValidityRange(FreqhomError, ValueError):
    """A wavelength falls outside the fitted range of a dispersion model."""


class InvalidGeometry(FreqhomError, ValueError):
    """Propagation direction or polarization spec is inconsistent with the crystal."""


class NonpositivePumpFrequency(FreqhomError, ValueError):
    pass


class NoBracket(FreqhomError):
    """No sign change was found for a requested root (no solution exists in range)."""


class DegenerateDenominator(FreqhomError, ZeroDivisionError):
    """The PMF angle is +/-90 deg: pump and output group velocities coincide."""


class UnsupportedShape(FreqhomError, ValueError):
    pass


class GridTooCoarse(FreqhomError, ValueError):
    pass


class GridMismatch(FreqhomError, ValueError):
    pass


class NumericalFailure(FreqhomError, ArithmeticError):
    pass


class WindowTooSmall(FreqhomError, ValueError):
    pass


class ZeroInput(FreqhomError, ZeroDivisionError):
    pass


class NotBracketed(FreqhomError):
    """Calibration target could not be bracketed by the energy search."""


class ZeroField(FreqhomError, ZeroDivisionError):
    pass


class ThresholdNotCrossed(FreqhomError):
    """A visibility scan never drops below the threshold on one side.

    ``open_end`` names the unbounded side in wavelength: ``"low"``,
    ``"high"`` or ``"both"``.
    """

    def __init__(self, message, open_end):
        super().__init__(message)
        self.open_end = open_end


class ConfigInvalid(FreqhomError, ValueError):
    pass


class ComputeFailed(FreqhomError):
    """An invariant gate failed during a CLI run."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
