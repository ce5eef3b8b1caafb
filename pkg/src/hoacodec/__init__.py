"""Higher-order-ambisonics compression toolkit.

Two complete encode/decode pipelines over multichannel ambisonic audio:

* a baseline that decomposes each 50%-overlapped time frame with an SVD,
  matches and interpolates the basis across frames, and codes the
  foreground/background channels with an AAC-like core codec;
* a frequency-domain variant that applies the SVD per frequency band
  *after* the MDCT, avoiding inter-frame seams, plus noise substitution
  for the ambient channels discarded by order reduction.

The top-level entry points live in :mod:`hoacodec.pipeline` (``encode`` /
``decode``) and :mod:`hoacodec.cli`.
"""

from hoacodec.errors import (
    ConfigurationError,
    DegenerateBasisError,
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
    StreamError,
    TrainingError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateBasisError",
    "FormatError",
    "NumericError",
    "ParameterError",
    "ShapeError",
    "StreamError",
    "TrainingError",
    "__version__",
]
