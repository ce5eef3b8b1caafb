"""Exception hierarchy shared by all codec modules."""


class HoaCodecError(Exception):
    """Base class for every error raised by this package."""


class FormatError(HoaCodecError):
    """A file is not what it claims to be (bad RIFF header, bad magic...)."""


class ShapeError(HoaCodecError):
    """Array dimensions violate an operation's contract."""


class ParameterError(HoaCodecError):
    """A parameter is outside its legal range (e.g. reduced order > N)."""


class NumericError(HoaCodecError):
    """Non-finite values where finite ones are required."""


class DegenerateBasisError(HoaCodecError):
    """Quantized basis columns are too collinear to invert Gram matrix."""


class StreamError(HoaCodecError):
    """Bitstream is truncated, corrupt, or fails a CRC check."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigurationError(HoaCodecError):
    """Encoder/decoder configuration is inconsistent with the stream."""


class TrainingError(HoaCodecError):
    """Codebook training was asked for more than the data can support."""
