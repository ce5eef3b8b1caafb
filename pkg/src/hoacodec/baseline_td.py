"""Time-domain blockwise-SVD reference path.

Each 2L-sample frame is decomposed with an SVD; the truncated, quantized
basis is matched to the previous frame (Hungarian on correlation magnitude,
sign correction), interpolated per sample across the frame's advance
region, and used to split the frame into foreground components and an
ambient residual whose ambisonics order is then reduced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hoacodec.errors import DegenerateBasisError, ParameterError, ShapeError
from hoacodec.numlin import hungarian, svd

CONDITION_CAP = 1e8


@dataclass
class TruncatedBasis:
    """First r (quantized) right-singular vectors of one frame, M x r."""

    vectors: np.ndarray
    frame: int = 0

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ShapeError("basis must be an M x r matrix")
        if self.vectors.shape[1] > self.vectors.shape[0]:
            raise ShapeError("rank r cannot exceed channel count M")

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]


@dataclass
class InterpolationWindow:
    """Blend weights w(l), l in [0, L): 0-ish at the seam, exactly 1 at l=L-1."""

    values: np.ndarray
    kind: str = "triangular"

    @classmethod
    def make(cls, half_length: int, kind: str = "triangular") -> "InterpolationWindow":
        l = np.arange(half_length)
        if kind == "triangular":
            values = (l + 1) / half_length
        elif kind == "hanning":
            values = 0.5 * (1.0 - np.cos(np.pi * (l + 1) / half_length))
        else:
            raise ParameterError(f"unknown interpolation window kind {kind!r}")
        return cls(values=values, kind=kind)


@dataclass
class FrameDecomposition:
    """Foreground components, ambient residual and the basis that split them."""

    foreground: np.ndarray  # (2L, r)
    ambient: np.ndarray  # (2L, M)
    basis: TruncatedBasis
    dropped: np.ndarray | None = None  # bool mask of columns excluded from Eq-style inverse


def extract_foreground(X: np.ndarray, basis: TruncatedBasis) -> np.ndarray:
    """Project a frame onto the quantized basis: X V (V^T V)^{-1}.

    The Gram inverse renormalizes the quantized, no-longer-orthonormal
    columns; the result is the least-squares minimizer of ||X - Y V^T||.
    """
    V = basis.vectors
    if X.shape[1] != V.shape[0]:
        raise ShapeError(f"frame has {X.shape[1]} channels, basis {V.shape[0]}")
    if V.shape[1] == 0:  # rank-0 test mode: empty foreground
        return np.zeros((X.shape[0], 0))
    gram = V.T @ V
    if np.linalg.cond(gram) > CONDITION_CAP:
        raise DegenerateBasisError(
            f"basis Gram matrix condition exceeds {CONDITION_CAP:g}"
        )
    return np.linalg.solve(gram, (X @ V).T).T


def drop_degenerate_columns(basis: TruncatedBasis) -> np.ndarray:
    """Boolean keep-mask: greedily drop later columns until the Gram
    matrix of the kept ones is invertible within the condition cap.
    All-False when even a single column is unusable (zero basis)."""
    V = basis.vectors
    keep = np.ones(V.shape[1], dtype=bool)
    while keep.any():
        sub = V[:, keep]
        if np.linalg.cond(sub.T @ sub) <= CONDITION_CAP:
            break
        keep[np.flatnonzero(keep)[-1]] = False
    return keep


def match_bases(prev: TruncatedBasis, cur: TruncatedBasis):
    """Align the current basis with the previous one.

    Hungarian assignment on cost 1 - |corr| between columns, then sign
    flips so every matched pair has a non-negative dot product.  Returns
    (assignment, signs, aligned) where aligned[:, i] corresponds to
    prev[:, i].
    """
    P, C = prev.vectors, cur.vectors
    if P.shape != C.shape:
        raise ShapeError("bases must share M and r")
    pn = np.linalg.norm(P, axis=0)
    cn = np.linalg.norm(C, axis=0)
    denom = np.outer(pn, cn)
    denom[denom == 0] = 1.0
    corr = (P.T @ C) / denom
    assignment = hungarian(1.0 - np.abs(corr))
    perm = assignment.permutation
    signs = np.where(corr[np.arange(len(perm)), perm] < 0, -1.0, 1.0)
    aligned = C[:, perm] * signs
    return assignment, signs, TruncatedBasis(vectors=aligned, frame=cur.frame)


def interpolate_basis(
    prev: TruncatedBasis, cur: TruncatedBasis, window: InterpolationWindow
) -> np.ndarray:
    """Per-sample blend (1-w(l)) prev + w(l) cur.

    Returns an (L, M, r) array; bases must already be matched and
    sign-aligned.
    """
    if prev.vectors.shape != cur.vectors.shape:
        raise ShapeError("bases must share M and r")
    w = window.values[:, None, None]
    return (1.0 - w) * prev.vectors[None] + w * cur.vectors[None]


def order_reduce(ambient: np.ndarray, t: int, order: int) -> np.ndarray:
    """Keep the first (t+1)^2 ACN channels of the ambient residual."""
    if t > order:
        raise ParameterError(f"reduced order t={t} exceeds signal order N={order}")
    if t < 0:
        raise ParameterError("reduced order must be >= 0")
    return ambient[:, : (t + 1) ** 2]


@dataclass
class BaselineFrameResult:
    decomposition: FrameDecomposition
    background: np.ndarray  # (2L, (t+1)^2)
    discarded: np.ndarray  # (2L, M-(t+1)^2) ambient channels dropped by order reduction
    per_sample_bases: np.ndarray  # (L, M, r) used over the advance region
    raw_basis: TruncatedBasis  # unquantized truncated right-singular vectors


class BaselineEncoderState:
    """Carries the previous frame's reconstructed basis across frames."""

    def __init__(self):
        self.prev_basis: TruncatedBasis | None = None


def truncated_basis(X: np.ndarray, rank: int, frame: int = 0) -> TruncatedBasis:
    """SVD of a frame and truncation of V to the first ``rank`` columns."""
    res = svd(X)
    return TruncatedBasis(vectors=res.right[:, :rank], frame=frame)


def foreground_with_fallback(X: np.ndarray, basis: TruncatedBasis):
    """Eq-style projection with the degenerate-column fallback.

    Returns (foreground, keep) where dropped columns are zeroed in the
    foreground and False in ``keep``.
    """
    keep = np.ones(basis.rank, dtype=bool)
    try:
        return extract_foreground(X, basis), keep
    except DegenerateBasisError:
        keep = drop_degenerate_columns(basis)
        foreground = np.zeros((X.shape[0], basis.rank))
        if keep.any():
            sub = TruncatedBasis(vectors=basis.vectors[:, keep], frame=basis.frame)
            foreground[:, keep] = extract_foreground(X, sub)
        return foreground, keep


def decompose_frame(
    X: np.ndarray,
    basis: TruncatedBasis,
    prev_basis: TruncatedBasis | None,
    window: InterpolationWindow,
    t: int,
    order: int,
    raw_basis: TruncatedBasis | None = None,
) -> BaselineFrameResult:
    """Split a frame given its (quantized) basis and the previous one.

    Foreground comes from the frame-end basis; the back-transform uses the
    per-sample interpolated bases over the advance region (first L samples)
    and the frame-end basis over the trailing half.
    """
    L = X.shape[0] // 2
    prev = prev_basis if prev_basis is not None else basis
    per_sample = interpolate_basis(prev, basis, window)
    foreground, keep = foreground_with_fallback(X, basis)

    approx = np.empty_like(X)
    fg_kept = foreground * keep
    approx[:L] = np.einsum("lr,lmr->lm", fg_kept[:L], per_sample)
    approx[L:] = fg_kept[L:] @ basis.vectors.T

    ambient = X - approx
    background = order_reduce(ambient, t, order)
    discarded = ambient[:, (t + 1) ** 2 :]

    dec = FrameDecomposition(
        foreground=foreground,
        ambient=ambient,
        basis=basis,
        dropped=None if keep.all() else ~keep,
    )
    return BaselineFrameResult(
        decomposition=dec,
        background=background,
        discarded=discarded,
        per_sample_bases=per_sample,
        raw_basis=raw_basis if raw_basis is not None else basis,
    )


def encode_frame_baseline(
    X: np.ndarray,
    frame_index: int,
    rank: int,
    t: int,
    order: int,
    state: BaselineEncoderState,
    window: InterpolationWindow,
    quantize_basis=None,
) -> BaselineFrameResult:
    """Full per-frame analysis of the time-domain path.

    ``quantize_basis``, when given, maps the matched/aligned basis to its
    quantized reconstruction (the side-info module supplies this); the
    first frame uses itself as the interpolation partner, so no blend.
    """
    raw = truncated_basis(X, rank, frame_index)

    if state.prev_basis is None:
        aligned = raw
    else:
        _, _, aligned = match_bases(state.prev_basis, raw)

    basis = TruncatedBasis(
        vectors=quantize_basis(aligned.vectors) if quantize_basis else aligned.vectors,
        frame=frame_index,
    )
    result = decompose_frame(
        X, basis, state.prev_basis, window, t, order, raw_basis=raw
    )
    state.prev_basis = basis
    return result
