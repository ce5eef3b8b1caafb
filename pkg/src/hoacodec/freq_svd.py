"""Frequency-domain SVD path: per-band decomposition of MDCT frames.

The spectrum of each frame is partitioned into contiguous bands, each band
gets its own SVD and truncated (quantized) basis, foreground components are
extracted per band with the same Gram-renormalized projection as the
time-domain path, and the residual's ambisonics order is reduced.  The
MDCT's built-in overlap supplies inter-frame continuity, so no basis
matching or interpolation is needed for reconstruction smoothness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hoacodec.baseline_td import (
    TruncatedBasis,
    drop_degenerate_columns,
    extract_foreground,
    truncated_basis,
)
from hoacodec.errors import DegenerateBasisError, ShapeError
from hoacodec.numlin import svd
from hoacodec.transform import SpectralFrame

MODE_SINGLE_BAND = 0
MODE_FOUR_BANDS = 1


@dataclass(frozen=True)
class BandLayout:
    """Contiguous low-to-high partition of the L MDCT bins."""

    lengths: tuple

    def __post_init__(self):
        if any(l <= 0 for l in self.lengths):
            raise ShapeError("band lengths must be positive")

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def total(self) -> int:
        return sum(self.lengths)

    @property
    def edges(self) -> list:
        """(start, stop) bin range per band."""
        stops = np.cumsum(self.lengths)
        starts = np.concatenate([[0], stops[:-1]])
        return list(zip(starts.tolist(), stops.tolist()))

    @classmethod
    def uniform(cls, num_bins: int, n: int) -> "BandLayout":
        if num_bins % n:
            raise ShapeError(f"{num_bins} bins do not split into {n} uniform bands")
        return cls(lengths=(num_bins // n,) * n)


def layout_for_mode(mode: int, num_bins: int, bands: int = 4) -> BandLayout:
    """Band layout of the two per-frame coding modes: 1 band or ``bands``
    uniform bands (4 by default)."""
    if mode == MODE_SINGLE_BAND:
        return BandLayout(lengths=(num_bins,))
    if mode == MODE_FOUR_BANDS:
        return BandLayout.uniform(num_bins, bands)
    raise ShapeError(f"unknown mode {mode}")


@dataclass
class BandDecomposition:
    """Per-band quantized bases and foreground components of one frame."""

    layout: BandLayout
    bases: list  # of TruncatedBasis, one per band (quantized)
    foregrounds: list  # of (l_i, r_i) arrays
    dropped: list  # per band: None or bool mask of excluded columns

    @property
    def ranks(self) -> list:
        return [b.rank for b in self.bases]

    def stacked_foreground(self) -> np.ndarray:
        """Vertically concatenated foreground, (L, r) when all ranks agree."""
        return np.concatenate(self.foregrounds, axis=0)


def band_split(spec: SpectralFrame, layout: BandLayout) -> list:
    """Row-contiguous partition of the L x M coefficient matrix."""
    S = spec.coeffs
    if layout.total != S.shape[0]:
        raise ShapeError(
            f"layout covers {layout.total} bins, frame has {S.shape[0]}"
        )
    return [S[a:b] for a, b in layout.edges]


def band_decompose(
    bands: list,
    ranks,
    layout: BandLayout,
    quantize_basis=None,
    bases: list | None = None,
) -> BandDecomposition:
    """Per-band SVD, truncation, optional quantization, and projection.

    ``bases`` overrides the per-band bases (the pipeline passes in the
    side-info-reconstructed ones so encoder and decoder stay in sync);
    otherwise each band's basis is the truncated SVD of the band,
    optionally passed through ``quantize_basis``.
    """
    if isinstance(ranks, int):
        ranks = [ranks] * len(bands)
    if len(ranks) != len(bands):
        raise ShapeError("one rank per band required")
    out_bases = []
    foregrounds = []
    dropped = []
    for i, (band, r) in enumerate(zip(bands, ranks)):
        if band.shape[0] < r:
            raise ShapeError(
                f"band {i} has {band.shape[0]} bins, cannot retain {r} components"
            )
        if bases is not None:
            basis = bases[i]
        else:
            basis = truncated_basis(band, r, frame=i)
            if quantize_basis is not None:
                basis = TruncatedBasis(vectors=quantize_basis(basis.vectors), frame=i)
        keep = np.ones(basis.rank, dtype=bool)
        try:
            fg = extract_foreground(band, basis)
        except DegenerateBasisError:
            keep = drop_degenerate_columns(basis)
            fg = np.zeros((band.shape[0], basis.rank))
            if keep.any():
                sub = TruncatedBasis(vectors=basis.vectors[:, keep])
                fg[:, keep] = extract_foreground(band, sub)
        out_bases.append(basis)
        foregrounds.append(fg * keep)
        dropped.append(None if keep.all() else ~keep)
    return BandDecomposition(
        layout=layout, bases=out_bases, foregrounds=foregrounds, dropped=dropped
    )


def reconstruct_spectrum(dec: BandDecomposition) -> np.ndarray:
    """Stack the per-band back-projections Y_i V_i^T into an L x M matrix."""
    parts = [fg @ basis.vectors.T for fg, basis in zip(dec.foregrounds, dec.bases)]
    return np.concatenate(parts, axis=0)


def compute_residual(spec: SpectralFrame, dec: BandDecomposition) -> np.ndarray:
    """S minus the stacked per-band approximation."""
    approx = reconstruct_spectrum(dec)
    if approx.shape != spec.coeffs.shape:
        raise ShapeError("decomposition does not match the frame shape")
    return spec.coeffs - approx


def compaction_gain(spec: SpectralFrame, rank: int, layout: BandLayout):
    """Energy captured by a global rank-r SVD vs per-band rank-r SVDs.

    Returns (energy_global, energy_banded); the banded value can never be
    below the global one since each band may choose its own basis.
    """
    if rank > spec.coeffs.shape[1]:
        raise ShapeError("rank exceeds channel count")
    s_global = svd(spec.coeffs).singular_values
    energy_global = float(np.sum(s_global[:rank] ** 2))
    energy_banded = 0.0
    for band in band_split(spec, layout):
        s = svd(band).singular_values
        energy_banded += float(np.sum(s[:rank] ** 2))
    return energy_global, energy_banded
