"""Exception types raised across the package."""


class LayoutError(ValueError):
    """A circuit layout is malformed or inconsistent with the model."""


class ShapeError(ValueError):
    """Input arrays have the wrong dimension or length."""


class SpectrumError(ValueError):
    """The model has no feature map, so there is no spectrum to report."""


class AliasingError(ValueError):
    """The sampling grid is too coarse for the model's frequencies."""


class NonIntegerFrequencyError(ValueError):
    """Fourier fitting on [0, 2pi) needs integer frequency scales."""


class NumericError(FloatingPointError):
    """A NaN or infinity turned up in a gradient or loss."""


class SaturatedError(RuntimeError):
    """The circuit cannot grow any further."""
