"""Exception hierarchy: every failure raised by this package derives from
:class:`KrescaleError`, so callers can catch one type at the boundary."""


class KrescaleError(Exception):
    """Base class for all errors raised by krescale."""


# --- tensors and archives ---------------------------------------------------


class ShapeMismatch(KrescaleError):
    """Data length, rank, or dimension disagrees with the stated shape."""


class EmptyShape(KrescaleError):
    """A shape has no dimensions or a dimension smaller than one."""


class NonFiniteValue(KrescaleError):
    """A tensor would contain NaN or infinity."""


class DuplicateName(KrescaleError):
    """Two archive entries share a name."""


class IoFailure(KrescaleError):
    """The underlying byte stream failed to read or write."""


class BadMagic(KrescaleError):
    """The stream does not start with the archive magic."""


class UnsupportedVersion(KrescaleError):
    """The archive declares a format version this build cannot read."""


class Truncated(KrescaleError):
    """The stream ended before the declared contents were read."""


class TrailingData(KrescaleError):
    """Bytes remain after the last declared archive entry."""


# --- resampling -------------------------------------------------------------


class BadMethod(KrescaleError):
    """Unknown resampling method name, or a method invalid in context."""


# --- spectra ----------------------------------------------------------------


class FrequencyOutOfRange(KrescaleError):
    """An integer frequency lies outside [0, dim) for its axis."""


class IndexOutOfRange(KrescaleError):
    """A bin index lies outside the grid."""


class DegenerateAmplitude(KrescaleError):
    """The requested ratio is undefined (zero amplitude or vanishing bin)."""


class BadFraction(KrescaleError):
    """A baseband fraction lies outside (0, 1]."""


# --- convolution ------------------------------------------------------------


class ChannelMismatch(KrescaleError):
    """Input channels disagree with kernel input channels."""


class EmptyOutput(KrescaleError):
    """Stride/padding/extent combination yields an empty output."""


class GridMismatch(KrescaleError):
    """Two periodic fields do not share a grid."""


# --- model surgery ----------------------------------------------------------


class ParseError(KrescaleError):
    """A manifest line could not be parsed.  Carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownLayerKind(ParseError):
    """A manifest line names a layer kind this build does not know."""


class ShapeError(KrescaleError):
    """A layer's weights or input do not fit together."""


class NoSpatialFc(KrescaleError):
    """Surgery asked to rescale a fully connected layer, but no layer has
    spatial structure declared."""
