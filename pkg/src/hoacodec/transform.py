"""Windowed MDCT analysis/synthesis with perfect-reconstruction overlap-add.

Forward transform of a 2L-sample windowed block z:

    X[k] = sum_{l=0}^{2L-1} z[l] cos[(pi/L)(l + 1/2 + L/2)(k + 1/2)]

computed through the standard DCT-IV folding.  The inverse applies the
matching unfold and the synthesis window (identical to the analysis
window); overlap-adding consecutive blocks at hop L cancels the
time-domain aliasing exactly for any Princen-Bradley window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from hoacodec.errors import ShapeError
from hoacodec.hoa_io import TimeFrame


@dataclass
class AnalysisWindow:
    """A 2L-sample window satisfying the Princen-Bradley condition."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size % 2:
            raise ShapeError("window must be a 1-D array of even length")

    @property
    def half_length(self) -> int:
        return self.values.size // 2

    def validate(self, tol: float = 1e-12) -> None:
        """Raise if the window is asymmetric or violates Princen-Bradley."""
        w = self.values
        L = self.half_length
        if np.max(np.abs(w - w[::-1])) > tol:
            raise ShapeError("window is not symmetric")
        pb = w[:L] ** 2 + w[L:] ** 2
        if np.max(np.abs(pb - 1.0)) > tol:
            raise ShapeError("window violates the Princen-Bradley condition")


def sine_window(half_length: int) -> AnalysisWindow:
    """w(l) = sin[(pi/2L)(l + 1/2)], the common MDCT default."""
    l = np.arange(2 * half_length)
    return AnalysisWindow(np.sin(np.pi / (2 * half_length) * (l + 0.5)))


@dataclass
class SpectralFrame:
    """L x M MDCT coefficients of one frame."""

    index: int
    coeffs: np.ndarray

    @property
    def num_bins(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_channels(self) -> int:
        return self.coeffs.shape[1]


def _dct4(u: np.ndarray) -> np.ndarray:
    # scipy's DCT-IV carries a factor 2 relative to the plain cosine sum
    return 0.5 * scipy.fft.dct(u, type=4, axis=0)


def mdct_forward(frame: TimeFrame, window: AnalysisWindow) -> SpectralFrame:
    """Window a 2L x M frame and return its L x M MDCT coefficients."""
    x = frame.samples
    L = window.half_length
    if x.ndim != 2 or x.shape[0] != 2 * L:
        raise ShapeError(
            f"frame has {x.shape[0] if x.ndim == 2 else x.ndim} rows, expected {2 * L}"
        )
    z = window.values[:, None] * x
    h = L // 2
    a, b, c, d = z[:h], z[h:L], z[L : L + h], z[L + h :]
    folded = np.concatenate([-c[::-1] - d, a - b[::-1]], axis=0)
    return SpectralFrame(index=frame.index, coeffs=_dct4(folded))


def mdct_inverse(spec: SpectralFrame, window: AnalysisWindow) -> np.ndarray:
    """Inverse MDCT plus synthesis windowing; returns a 2L x M block."""
    X = spec.coeffs
    L = window.half_length
    if X.ndim != 2 or X.shape[0] != L:
        raise ShapeError(
            f"spectrum has {X.shape[0] if X.ndim == 2 else X.ndim} rows, expected {L}"
        )
    t = _dct4(X) * (2.0 / L)
    h = L // 2
    y = np.empty((2 * L, X.shape[1]))
    y[:h] = t[h:]
    y[h : L + h] = -t[::-1]
    y[L + h :] = -t[:h]
    return window.values[:, None] * y


def overlap_add(blocks, half_length: int, original_length: int) -> np.ndarray:
    """Overlap-add 2L x M blocks at hop L and strip the head/tail padding.

    ``blocks`` are in frame order: block f lands on padded samples
    [f*L, f*L + 2L).  Returns the first ``original_length`` samples after
    the leading L padding samples.
    """
    blocks = list(blocks)
    if not blocks:
        return np.zeros((0, 0))
    L = half_length
    channels = blocks[0].shape[1]
    out = np.zeros(((len(blocks) + 1) * L, channels))
    for f, blk in enumerate(blocks):
        if blk.shape != (2 * L, channels):
            raise ShapeError(f"block {f} has shape {blk.shape}, expected {(2 * L, channels)}")
        out[f * L : f * L + 2 * L] += blk
    return out[L : L + original_length]


def analyze(signal_samples: np.ndarray, half_length: int, window: AnalysisWindow | None = None):
    """MDCT-transform a (length, channels) array; returns (frames, window).

    Convenience wrapper chaining padding, segmentation and the forward
    transform the way both pipelines consume per-channel-group signals.
    """
    from hoacodec.hoa_io import num_frames, pad_signal

    if window is None:
        window = sine_window(half_length)
    samples = np.asarray(signal_samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    padded = pad_signal(samples, half_length)
    L = half_length
    frames = [
        TimeFrame(index=f, samples=padded[f * L : f * L + 2 * L])
        for f in range(num_frames(samples.shape[0], L))
    ]
    return [mdct_forward(fr, window) for fr in frames], window


def synthesize(spectra, window: AnalysisWindow, original_length: int) -> np.ndarray:
    """Inverse of :func:`analyze`: IMDCT every frame and overlap-add."""
    blocks = [mdct_inverse(sp, window) for sp in spectra]
    return overlap_add(blocks, window.half_length, original_length)
