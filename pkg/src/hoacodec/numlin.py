"""Shared numerical kernels: SVD, optimal assignment, Lloyd codebook training.

The SVD and the assignment solver wrap LAPACK/scipy primitives behind
deterministic contracts (sign canonicalization, lexicographic tie-breaking);
the Generalized Lloyd trainer is implemented here because its seeding,
empty-cell and stopping rules are part of the codec's reproducibility
contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from hoacodec.errors import FormatError, NumericError, ShapeError, TrainingError

_CODEBOOK_MAGIC = b"HACB"
_CODEBOOK_VERSION = 1
_FLAG_DEGENERATE = 1


@dataclass
class SvdResult:
    """Thin SVD A = left @ diag(singular_values) @ right.T, sign-canonicalized."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


@dataclass
class Assignment:
    """A minimizing bijection for a square cost matrix."""

    permutation: np.ndarray  # target index for each source index
    total_cost: float


@dataclass
class Codebook:
    """A trained set of centroids plus the metadata needed to reproduce it."""

    centroids: np.ndarray  # (size, dim)
    seed: int = 0
    degenerate: bool = False
    # per-iteration training distortions; informational, not serialized
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=np.float64))
        if self.centroids.shape[0] < 1:
            raise ShapeError("codebook needs at least one centroid")
        if not np.all(np.isfinite(self.centroids)):
            raise NumericError("codebook centroids must be finite")

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def svd(A: np.ndarray) -> SvdResult:
    """Thin SVD with deterministic signs.

    Each right-singular vector is flipped so its largest-magnitude entry is
    positive (first occurrence on ties); the paired left vector is flipped
    with it, keeping the product unchanged.
    """
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise NumericError("svd input contains non-finite values")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    V = Vt.T
    anchor = np.abs(V).argmax(axis=0)
    signs = np.sign(V[anchor, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return SvdResult(left=U * signs, singular_values=s, right=V * signs)


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-cost assignment; ties resolved to the lexicographically
    smallest permutation.

    The optimum value comes from scipy's assignment solver; the specific
    permutation is then pinned down by fixing sources in order to the
    smallest target that keeps the remainder optimal.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise NumericError("cost matrix contains non-finite values")
    r = cost.shape[0]
    if r == 0:
        return Assignment(permutation=np.zeros(0, dtype=np.intp), total_cost=0.0)

    def best(sub: np.ndarray) -> float:
        rows, cols = scipy.optimize.linear_sum_assignment(sub)
        return float(sub[rows, cols].sum())

    optimum = best(cost)
    tol = 1e-9 * max(1.0, abs(optimum))
    perm = np.empty(r, dtype=np.intp)
    free = list(range(r))
    fixed_cost = 0.0
    for i in range(r):
        for j in free:
            rest = [c for c in free if c != j]
            tail = best(cost[np.ix_(range(i + 1, r), rest)]) if rest else 0.0
            if fixed_cost + cost[i, j] + tail <= optimum + tol:
                perm[i] = j
                fixed_cost += cost[i, j]
                free.remove(j)
                break
        else:  # numerically impossible unless tol is violated
            raise NumericError("assignment tie resolution failed")
    return Assignment(permutation=perm, total_cost=optimum)


def _seed_centroids(training: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++-style seeding: spread initial centroids by squared distance."""
    n = training.shape[0]
    centroids = np.empty((size, training.shape[1]))
    centroids[0] = training[rng.integers(n)]
    d2 = np.sum((training - centroids[0]) ** 2, axis=1)
    for k in range(1, size):
        total = d2.sum()
        if total <= 0:
            centroids[k] = training[rng.integers(n)]
            continue
        probs = d2 / total
        centroids[k] = training[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((training - centroids[k]) ** 2, axis=1))
    return centroids


def _assign(training: np.ndarray, centroids: np.ndarray):
    """Nearest centroid per training vector; ties go to the smaller index."""
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2 ; argmin over c
    cross = training @ centroids.T
    d2 = np.sum(centroids**2, axis=1)[None, :] - 2.0 * cross
    labels = np.argmin(d2, axis=1)
    dist = d2[np.arange(training.shape[0]), labels] + np.sum(training**2, axis=1)
    return labels, np.maximum(dist, 0.0)


def gla_train(
    training,
    size: int,
    tol: float = 1e-6,
    max_iter: int = 200,
    seed: int = 0,
) -> Codebook:
    """Generalized Lloyd training of a ``size``-entry codebook.

    Alternates nearest-centroid partition and centroid-mean updates until
    the relative distortion improvement drops below ``tol``.  Empty cells
    are reseeded with the training vector farthest from its current
    centroid.  Deterministic for a fixed seed.
    """
    training = np.atleast_2d(np.asarray(training, dtype=np.float64))
    if training.shape[0] == 0:
        raise TrainingError("empty training set")
    if size < 1:
        raise TrainingError("codebook size must be >= 1")
    distinct = np.unique(training, axis=0).shape[0]
    degenerate = size > distinct

    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(training, size, rng)
    prev = np.inf
    history = []
    for _ in range(max_iter):
        labels, dist = _assign(training, centroids)
        # reseed empty cells before the mean update
        counts = np.bincount(labels, minlength=size)
        for k in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist))
            centroids[k] = training[far]
            dist[far] = 0.0
        labels, dist = _assign(training, centroids)
        step = float(dist.mean())
        history.append(step)
        for k in range(size):
            members = training[labels == k]
            if members.shape[0]:
                centroids[k] = members.mean(axis=0)
        if np.isfinite(prev) and prev - step <= tol * max(prev, np.finfo(float).tiny):
            break
        prev = step
    return Codebook(centroids=centroids, seed=seed, degenerate=degenerate, history=history)


def quantize_nearest(v: np.ndarray, cb: Codebook):
    """Index and value of the closest centroid (ties -> smallest index)."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != cb.dim:
        raise ShapeError(f"vector has dim {v.size}, codebook dim {cb.dim}")
    d2 = np.sum((cb.centroids - v) ** 2, axis=1)
    idx = int(np.argmin(d2))
    return idx, cb.centroids[idx].copy()


def distortion(training: np.ndarray, cb: Codebook) -> float:
    """Mean squared distance of a training set to its nearest centroids."""
    training = np.atleast_2d(np.asarray(training, dtype=np.float64))
    _, dist = _assign(training, cb.centroids)
    return float(dist.mean())


# --------------------------------------------------------------------------
# Codebook file format: little-endian, versioned.
#   magic 'HACB' | u16 version | u16 flags | u32 dim | u32 size | u64 seed
#   followed by size*dim float64 centroids, row-major.
# --------------------------------------------------------------------------

def save_codebook(cb: Codebook, path) -> None:
    header = _CODEBOOK_MAGIC + struct.pack(
        "<HHIIQ",
        _CODEBOOK_VERSION,
        _FLAG_DEGENERATE if cb.degenerate else 0,
        cb.dim,
        cb.size,
        cb.seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(cb.centroids.astype("<f8").tobytes())


def load_codebook(path) -> Codebook:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 24 or data[:4] != _CODEBOOK_MAGIC:
        raise FormatError(f"{path}: not a codebook file")
    version, flags, dim, size, seed = struct.unpack_from("<HHIIQ", data, 4)
    if version != _CODEBOOK_VERSION:
        raise FormatError(f"{path}: unsupported codebook version {version}")
    body = data[24:]
    expect = dim * size * 8
    if len(body) != expect:
        raise FormatError(f"{path}: payload is {len(body)} bytes, expected {expect}")
    centroids = np.frombuffer(body, dtype="<f8").reshape(size, dim).copy()
    return Codebook(centroids=centroids, seed=seed, degenerate=bool(flags & _FLAG_DEGENERATE))
