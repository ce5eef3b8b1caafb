"""Perceptual noise substitution for ambient channels dropped by order
reduction.

Per frame, the power spectrum of every discarded channel is partitioned
into the 49 AAC frequency groups; groups whose channel-averaged spectral
flatness exceeds a threshold are flagged noise-like and their average
per-bin power is quantized and transmitted.  The decoder regenerates those
groups with seeded pseudo-random coefficients rescaled to the transmitted
power exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from hoacodec.errors import ShapeError

# ISO/IEC 14496-3 scalefactor-band offsets, 48 kHz long windows: 49 bands
# over 1024 bins.
AAC_48K_LONG_OFFSETS = (
    0, 4, 8, 12, 16, 20, 24, 28, 32, 36,
    40, 48, 56, 64, 72, 80, 88, 96,
    108, 120, 132, 144, 160, 176, 196, 216, 240, 264, 292, 320,
    352, 384, 416, 448, 480, 512, 544, 576, 608, 640,
    672, 704, 736, 768, 800, 832, 864, 896, 928, 1024,
)

NUM_GROUPS = 49

# energy quantizer: index 0 is exact silence, 1..63 span 96 dB in equal steps
ENERGY_BITS = 6
ENERGY_FLOOR_DB = -60.0
ENERGY_SPAN_DB = 96.0
_ENERGY_LEVELS = (1 << ENERGY_BITS) - 1  # nonzero indices 1..63
_ENERGY_STEP_DB = ENERGY_SPAN_DB / (_ENERGY_LEVELS - 1)


@dataclass(frozen=True)
class FrequencyGroups:
    """49 contiguous bin ranges covering [0, L)."""

    offsets: tuple

    def __post_init__(self):
        o = self.offsets
        if len(o) != NUM_GROUPS + 1:
            raise ShapeError(f"need {NUM_GROUPS + 1} offsets, got {len(o)}")
        if o[0] != 0 or any(b <= a for a, b in zip(o, o[1:])):
            raise ShapeError("offsets must start at 0 and strictly increase")

    @property
    def num_bins(self) -> int:
        return self.offsets[-1]

    @property
    def edges(self) -> list:
        return list(zip(self.offsets, self.offsets[1:]))

    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.offsets))

    @classmethod
    def aac_48k_long(cls) -> "FrequencyGroups":
        return cls(offsets=AAC_48K_LONG_OFFSETS)

    @classmethod
    def uniform(cls, num_bins: int, count: int = NUM_GROUPS) -> "FrequencyGroups":
        """Equal-width fallback for frame lengths other than 1024 bins."""
        if num_bins < count:
            raise ShapeError(f"cannot form {count} groups from {num_bins} bins")
        bounds = np.linspace(0, num_bins, count + 1).round().astype(int)
        return cls(offsets=tuple(bounds.tolist()))

    @classmethod
    def from_config(cls, path) -> "FrequencyGroups":
        """Load a group table: JSON with an ``offsets`` list of 50 ints."""
        with open(path) as fh:
            doc = json.load(fh)
        return cls(offsets=tuple(int(v) for v in doc["offsets"]))

    def to_config(self, path, sample_rate: int | None = None) -> None:
        doc = {"offsets": list(self.offsets)}
        if sample_rate is not None:
            doc["sample_rate"] = sample_rate
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)


def groups_for(num_bins: int) -> FrequencyGroups:
    """Default table: the AAC 48 kHz long-window bands at L=1024, an
    equal-width 49-group split otherwise."""
    if num_bins == 1024:
        return FrequencyGroups.aac_48k_long()
    return FrequencyGroups.uniform(num_bins)


@dataclass
class NoiseGroupInfo:
    """Per-group activity flags and quantized energy indices for one frame."""

    active: np.ndarray  # (49,) bool
    energy_indices: np.ndarray  # (49,) uint8; meaningful where active

    @classmethod
    def empty(cls) -> "NoiseGroupInfo":
        return cls(
            active=np.zeros(NUM_GROUPS, dtype=bool),
            energy_indices=np.zeros(NUM_GROUPS, dtype=np.uint8),
        )

    def energies(self) -> np.ndarray:
        """Dequantized per-bin average power per group (0 where inactive)."""
        out = np.zeros(NUM_GROUPS)
        nz = self.active & (self.energy_indices > 0)
        out[nz] = dequantize_energy(self.energy_indices[nz])
        return out


def quantize_energy(energy: float) -> int:
    """Log-domain 6-bit index; 0 encodes exact silence."""
    if energy <= 0:
        return 0
    db = 10.0 * np.log10(energy)
    if db < ENERGY_FLOOR_DB - _ENERGY_STEP_DB / 2:
        return 0
    idx = int(round((db - ENERGY_FLOOR_DB) / _ENERGY_STEP_DB)) + 1
    return int(np.clip(idx, 1, _ENERGY_LEVELS))


def dequantize_energy(index):
    """Inverse of :func:`quantize_energy` (vectorized; index 0 -> 0)."""
    index = np.asarray(index)
    db = ENERGY_FLOOR_DB + (index.astype(np.float64) - 1) * _ENERGY_STEP_DB
    out = 10.0 ** (db / 10.0)
    return np.where(index == 0, 0.0, out)


def spectral_flatness(power) -> float:
    """Geometric over arithmetic mean of a floored power spectrum.

    1.0 for a flat (noise-like) group, near 0 for a single dominant bin.
    The floor removes the log singularity at zero power; evaluating on
    mean-normalized values makes the constant case exactly 1 and the
    AM-GM bound is clamped against rounding dust.
    """
    p = np.asarray(power, dtype=np.float64)
    if p.size == 0:
        raise ShapeError("empty power group")
    mean = p.mean()
    floored = np.maximum(p, 1e-12 * mean + 1e-30)
    ratio = floored / floored.mean()
    return min(1.0, float(np.exp(np.mean(np.log(ratio)))))


def analyze_discarded(
    discarded_spectra: np.ndarray,
    groups: FrequencyGroups,
    threshold: float = 0.25,
) -> NoiseGroupInfo:
    """Flatness-gate the discarded channels' spectra and quantize energies.

    ``discarded_spectra`` is (L, C) MDCT coefficients of the C dropped
    channels.  A group is active when the channel-averaged flatness of its
    power spectrum exceeds ``threshold``; its transmitted energy is the
    per-bin power averaged over bins and channels.
    """
    if discarded_spectra.ndim != 2:
        raise ShapeError("discarded spectra must be (L, C)")
    L, C = discarded_spectra.shape
    if C == 0:
        return NoiseGroupInfo.empty()
    if groups.num_bins != L:
        raise ShapeError(f"group table covers {groups.num_bins} bins, frame has {L}")
    power = discarded_spectra**2
    active = np.zeros(NUM_GROUPS, dtype=bool)
    indices = np.zeros(NUM_GROUPS, dtype=np.uint8)
    for j, (a, b) in enumerate(groups.edges):
        p = power[a:b]  # (bins, C)
        floored = np.maximum(p, 1e-12 * p.mean(axis=0) + 1e-30)
        ratio = floored / floored.mean(axis=0)
        flat = float(np.mean(np.minimum(1.0, np.exp(np.mean(np.log(ratio), axis=0)))))
        if flat > threshold:
            idx = quantize_energy(float(p.mean()))
            # below-floor energy decodes to silence anyway: send inactive
            if idx > 0:
                active[j] = True
                indices[j] = idx
    return NoiseGroupInfo(active=active, energy_indices=indices)


def _channel_rng(stream_seed: int, frame_index: int, channel_index: int):
    return np.random.default_rng(
        np.random.SeedSequence([int(stream_seed), int(frame_index), int(channel_index)])
    )


def synthesize_noise(
    info: NoiseGroupInfo,
    groups: FrequencyGroups,
    channel_count: int,
    stream_seed: int,
    frame_index: int,
    channel_offset: int = 0,
) -> np.ndarray:
    """Decoder-side spectra for the discarded channels, (L, C).

    Active groups are filled with seeded Gaussian coefficients rescaled so
    each channel's per-bin average power in the group equals the
    dequantized energy exactly; inactive groups stay zero.  The RNG seed
    derives from (stream seed, frame index, absolute channel index), so
    decoding is reproducible without transmitting the noise.
    """
    out = np.zeros((groups.num_bins, channel_count))
    if channel_count == 0:
        return out
    energies = info.energies()
    edges = groups.edges
    for c in range(channel_count):
        rng = _channel_rng(stream_seed, frame_index, channel_offset + c)
        for j in np.flatnonzero(info.active):
            a, b = edges[j]
            e = energies[j]
            if e <= 0:
                continue
            draw = rng.standard_normal(b - a)
            ss = np.sum(draw**2)
            if ss == 0:
                draw = np.ones(b - a)
                ss = float(b - a)
            out[a:b, c] = draw * np.sqrt(e * (b - a) / ss)
    return out
