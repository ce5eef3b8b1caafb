"""AAC-like coding of component channels.

Per channel and frame: a simplified psychoacoustic masking curve over the
49 frequency groups, scalefactor search meeting a maximum noise-to-mask
ratio per band, x^(3/4) companded integer quantization, and canonical
Huffman entropy coding with trained tables and a per-band raw fallback.

The model is deliberately compact: a two-slope spreading over band indices
with a fixed SNR offset instead of tonality estimation, scalefactors on a
1.5 dB grid spanning +-120 dB.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field

import numpy as np

from hoacodec.bitio import BitReader, BitWriter
from hoacodec.errors import FormatError, ShapeError, StreamError
from hoacodec.noise_subst import FrequencyGroups

SF_MIN = -80  # 1.5 dB steps: -120 dB
SF_MAX = 80  # +120 dB
_SF_COUNT = SF_MAX - SF_MIN + 1
_SF_STEPS = 10.0 ** (1.5 * np.arange(SF_MAX, SF_MIN - 1, -1) / 20.0)  # coarse -> fine
_QUANT_MAGIC = 0.4054

ESCAPE_SYMBOL = 16  # magnitudes 0..15 are coded directly, >=16 escape
_ALPHABET = ESCAPE_SYMBOL + 1

_TABLE_MAGIC = b"HAHT"
_TABLE_VERSION = 1


@dataclass
class MaskingConfig:
    """Parameters of the simplified masking model (all config-exposed)."""

    spread_lower_db: float = 22.0  # decay per band toward lower frequencies
    spread_upper_db: float = 12.0  # decay per band toward higher frequencies
    snr_offset_db: float = 18.0  # tonality-independent masker-to-threshold drop
    absolute_floor: float = 1e-9  # per-band power floor (hearing-threshold stand-in)


@dataclass
class MaskingCurve:
    """Masked threshold power per frequency group."""

    band_power: np.ndarray

    def __post_init__(self):
        self.band_power = np.asarray(self.band_power, dtype=np.float64)


def band_energies(spectrum: np.ndarray, groups: FrequencyGroups) -> np.ndarray:
    s2 = np.asarray(spectrum, dtype=np.float64) ** 2
    return np.add.reduceat(s2, groups.offsets[:-1])


def masking_threshold(
    spectrum: np.ndarray,
    groups: FrequencyGroups,
    config: MaskingConfig | None = None,
) -> MaskingCurve:
    """Spread per-band energy with two slopes, drop by the SNR offset, floor."""
    cfg = config or MaskingConfig()
    if spectrum.shape[0] != groups.num_bins:
        raise ShapeError(
            f"spectrum has {spectrum.shape[0]} bins, group table {groups.num_bins}"
        )
    energy = band_energies(spectrum, groups)
    nb = energy.size
    d = np.arange(nb)[:, None] - np.arange(nb)[None, :]  # target - masker
    atten_db = np.where(d >= 0, cfg.spread_upper_db * d, -cfg.spread_lower_db * d)
    spread = energy[None, :] * 10.0 ** (-atten_db / 10.0)
    mask = spread.sum(axis=1) * 10.0 ** (-cfg.snr_offset_db / 10.0)
    return MaskingCurve(band_power=np.maximum(mask, cfg.absolute_floor))


@dataclass
class CodedChannel:
    """Quantization result for one channel of one frame."""

    num_bins: int
    zero_band: np.ndarray  # (nb,) bool: band transmitted as silent
    scalefactors: np.ndarray  # (nb,) int in [SF_MIN, SF_MAX]; valid where not zero_band
    quant_indices: np.ndarray  # (num_bins,) int64 signed
    nmr: np.ndarray = field(default=None)  # encoder-side achieved NMR per band
    escalated: np.ndarray = field(default=None)  # bands where no scalefactor met target
    band_costs: dict = field(default=None, repr=False)  # cache: band -> (huff, raw, width)

    def step_sizes(self) -> np.ndarray:
        return 10.0 ** (1.5 * self.scalefactors / 20.0)


def _quantize(absx: np.ndarray, step: float) -> np.ndarray:
    return np.floor((absx / step) ** 0.75 + _QUANT_MAGIC).astype(np.int64)


def _dequantize(q: np.ndarray, step: float) -> np.ndarray:
    return (q.astype(np.float64) ** (4.0 / 3.0)) * step


# q^(4/3) lookup for the small quantizer indices that dominate; larger
# values fall back to pow
_POW43_LUT = np.arange(4096, dtype=np.float64) ** (4.0 / 3.0)
_SF_STEPS_34 = _SF_STEPS**0.75


def _pow43(q: np.ndarray) -> np.ndarray:
    small = q < _POW43_LUT.size
    if small.all():
        return _POW43_LUT[q.astype(np.intp)]
    out = np.where(small, _POW43_LUT[np.minimum(q, _POW43_LUT.size - 1).astype(np.intp)], 0.0)
    big = ~small
    out[big] = q[big] ** (4.0 / 3.0)
    return out


def quantize_mnmr(
    spectrum: np.ndarray,
    mask: MaskingCurve,
    target: float,
    groups: FrequencyGroups,
) -> CodedChannel:
    """Per band, the coarsest scalefactor whose noise stays within
    ``target`` times the masked threshold.

    Bands whose full energy already fits the budget are sent as silent.
    If even the finest step misses the target (pathological inputs), the
    band is coded at its minimum-noise scalefactor and flagged.
    """
    if target <= 0:
        raise ShapeError("MNMR target must be positive")
    x = np.asarray(spectrum, dtype=np.float64)
    if x.shape[0] != groups.num_bins:
        raise ShapeError("spectrum does not match the group table")
    nb = len(groups.edges)
    zero_band = np.zeros(nb, dtype=bool)
    scalefactors = np.zeros(nb, dtype=np.int64)
    qidx = np.zeros(x.shape[0], dtype=np.int64)
    nmr = np.zeros(nb)
    escalated = np.zeros(nb, dtype=bool)

    for b, (lo, hi) in enumerate(groups.edges):
        xs = x[lo:hi]
        budget = target * mask.band_power[b]
        energy = float(np.sum(xs**2))
        if energy <= budget:
            zero_band[b] = True
            nmr[b] = energy / mask.band_power[b]
            continue
        absx = np.abs(xs)
        absx34 = absx**0.75
        peak34 = float(absx34.max())
        # scalefactors whose step quantizes every coefficient to zero give
        # noise == band energy > budget, so the coarse-to-fine scan can
        # start at the first step that produces a nonzero index
        ratio = peak34 / _SF_STEPS_34  # ascending (steps run coarse to fine)
        first = int(np.searchsorted(ratio, 1.0 - _QUANT_MAGIC, side="left"))
        first = min(first, _SF_COUNT - 1)
        pick = -1
        best = (np.inf, -1)
        for chunk in range(first, _SF_COUNT, 16):
            rows = slice(chunk, min(chunk + 16, _SF_COUNT))
            q = np.floor(absx34[None, :] / _SF_STEPS_34[rows, None] + _QUANT_MAGIC)
            deq = _pow43(q) * _SF_STEPS[rows, None]
            noise = np.sum((absx[None, :] - deq) ** 2, axis=1)
            ok = noise <= budget
            if ok.any():
                j = int(np.argmax(ok))
                pick = chunk + j
                picked_q = q[j]
                picked_noise = float(noise[j])
                break
            j = int(np.argmin(noise))
            if noise[j] < best[0]:
                best = (float(noise[j]), chunk + j)
        if pick < 0:  # no scalefactor meets the target: flag, use min-noise
            escalated[b] = True
            pick = best[1] if best[1] >= 0 else _SF_COUNT - 1
            step34 = _SF_STEPS_34[pick]
            picked_q = np.floor(absx34 / step34 + _QUANT_MAGIC)
            picked_noise = float(np.sum((absx - _pow43(picked_q) * _SF_STEPS[pick]) ** 2))
        scalefactors[b] = SF_MAX - pick
        qidx[lo:hi] = np.sign(xs) * picked_q.astype(np.int64)
        nmr[b] = picked_noise / mask.band_power[b]

    return CodedChannel(
        num_bins=x.shape[0],
        zero_band=zero_band,
        scalefactors=scalefactors,
        quant_indices=qidx,
        nmr=nmr,
        escalated=escalated,
    )


def dequantize_channel(coded: CodedChannel, groups: FrequencyGroups) -> np.ndarray:
    """Reconstruct the spectrum a decoder sees."""
    widths = groups.widths()
    steps = np.where(coded.zero_band, 0.0, 10.0 ** (1.5 * coded.scalefactors / 20.0))
    per_bin = np.repeat(steps, widths)
    q = coded.quant_indices
    return np.sign(q) * _pow43(np.abs(q)) * per_bin


def measure_nmr(
    original: np.ndarray,
    decoded: np.ndarray,
    mask: MaskingCurve,
    groups: FrequencyGroups,
) -> np.ndarray:
    """Per-band quantization-noise power over masked threshold power."""
    if original.shape != decoded.shape:
        raise ShapeError("original/decoded shape mismatch")
    err2 = (np.asarray(original, dtype=np.float64) - decoded) ** 2
    noise = np.add.reduceat(err2, groups.offsets[:-1])
    return noise / mask.band_power


# --------------------------------------------------------------------------
# Entropy coding: canonical Huffman over magnitudes 0..15 plus an escape,
# trained on this project's material.  Per coded band a 1-bit mode selects
# Huffman or raw fixed-width, so the payload never exceeds the raw coding.
# --------------------------------------------------------------------------

class HuffmanTable:
    """Canonical Huffman code defined entirely by its code lengths."""

    _FAST_BITS = 12

    def __init__(self, lengths):
        lengths = [int(v) for v in lengths]
        if len(lengths) != _ALPHABET:
            raise FormatError(f"expected {_ALPHABET} code lengths")
        if any(l < 1 or l > 32 for l in lengths):
            raise FormatError("code lengths must be in [1, 32]")
        if abs(sum(2.0 ** -l for l in lengths) - 1.0) > 1e-9:
            raise FormatError("code lengths violate the Kraft equality")
        self.lengths = lengths
        self.length_array = np.asarray(lengths, dtype=np.int64)
        order = sorted(range(_ALPHABET), key=lambda s: (lengths[s], s))
        self.codes = [0] * _ALPHABET
        code = 0
        prev_len = lengths[order[0]]
        for s in order:
            code <<= lengths[s] - prev_len
            self.codes[s] = code
            prev_len = lengths[s]
            code += 1
        self._decode_map = {
            (lengths[s], self.codes[s]): s for s in range(_ALPHABET)
        }
        # one-shot decode table over the first _FAST_BITS bits
        fb = self._FAST_BITS
        self._fast = np.full(1 << fb, -1, dtype=np.int32)  # (symbol << 6) | length
        for s in range(_ALPHABET):
            l = lengths[s]
            if l <= fb:
                base = self.codes[s] << (fb - l)
                self._fast[base : base + (1 << (fb - l))] = (s << 6) | l

    def write_symbol(self, writer: BitWriter, symbol: int) -> None:
        writer.write(self.codes[symbol], self.lengths[symbol])

    def read_symbol(self, reader: BitReader) -> int:
        entry = int(self._fast[reader.peek(self._FAST_BITS)])
        if entry >= 0:
            reader.skip(entry & 63)
            return entry >> 6
        code = 0
        for length in range(1, 33):
            code = (code << 1) | reader.read(1)
            sym = self._decode_map.get((length, code))
            if sym is not None:
                return sym
        raise StreamError("invalid Huffman code")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_TABLE_MAGIC + struct.pack("<HH", _TABLE_VERSION, _ALPHABET))
            fh.write(bytes(self.lengths))

    @classmethod
    def load(cls, path) -> "HuffmanTable":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 8 or data[:4] != _TABLE_MAGIC:
            raise FormatError(f"{path}: not a Huffman table file")
        version, nsym = struct.unpack_from("<HH", data, 4)
        if version != _TABLE_VERSION or nsym != _ALPHABET:
            raise FormatError(f"{path}: unsupported table version/alphabet")
        return cls(list(data[8 : 8 + nsym]))

    @classmethod
    def train(cls, magnitude_histogram) -> "HuffmanTable":
        """Optimal lengths for a magnitude histogram, then reassigned in
        magnitude order so code length never decreases with magnitude
        (keeps the coarser-step-never-costs-more property exact)."""
        hist = np.asarray(magnitude_histogram, dtype=np.float64)
        if hist.size != _ALPHABET:
            raise FormatError(f"histogram needs {_ALPHABET} entries")
        hist = np.maximum(hist, 1.0)
        # enforce non-increasing counts so lengths are monotone in magnitude
        hist = np.maximum.accumulate(hist[::-1])[::-1]
        heap = [(float(hist[s]), s, (s,)) for s in range(_ALPHABET)]
        heapq.heapify(heap)
        lengths = [0] * _ALPHABET
        counter = _ALPHABET
        while len(heap) > 1:
            w1, _, s1 = heapq.heappop(heap)
            w2, _, s2 = heapq.heappop(heap)
            for s in s1 + s2:
                lengths[s] += 1
            heapq.heappush(heap, (w1 + w2, counter, s1 + s2))
            counter += 1
        ordered = sorted(lengths)
        return cls(ordered)


# default table: frozen from training on the synthetic scene corpus at
# MNMR targets 0.5..8 (demos/05_retrain_tables.py reproduces it)
DEFAULT_MAGNITUDE_LENGTHS = (
    2, 2, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 15,
)

def default_table() -> HuffmanTable:
    return HuffmanTable(DEFAULT_MAGNITUDE_LENGTHS)


def _raw_width(values: np.ndarray) -> int:
    peak = int(np.max(np.abs(values), initial=0))
    return max(1, peak.bit_length())


def _band_costs(values: np.ndarray, table: HuffmanTable):
    """Exact (huffman_bits, raw_bits, raw_width) for one band's values."""
    mags = np.abs(values)
    width = _raw_width(values)
    raw_cost = 6 + values.size * (width + 1)
    clipped = np.minimum(mags, ESCAPE_SYMBOL)
    huff_cost = int(table.length_array[clipped].sum())
    huff_cost += int(np.count_nonzero(mags))  # sign bits
    esc = mags[mags >= ESCAPE_SYMBOL]
    if esc.size:
        # unsigned Exp-Golomb of (mag - ESCAPE_SYMBOL) costs 2*bitlen(v+1)-1
        v1 = esc - ESCAPE_SYMBOL + 1
        huff_cost += int(np.sum(2 * (np.floor(np.log2(v1)).astype(np.int64) + 1) - 1))
    return huff_cost, raw_cost, width


def channel_cost(coded: CodedChannel, groups: FrequencyGroups, table: HuffmanTable) -> int:
    """Exact bit count :func:`entropy_encode_channel` would produce."""
    total = 0
    cache = {}
    for b, (lo, hi) in enumerate(groups.edges):
        total += 1  # zero flag
        if coded.zero_band[b]:
            continue
        costs = _band_costs(coded.quant_indices[lo:hi], table)
        cache[b] = costs
        total += 8 + 1 + min(costs[0], costs[1])
    coded.band_costs = cache
    return total


def entropy_encode_channel(
    coded: CodedChannel,
    groups: FrequencyGroups,
    table: HuffmanTable,
    writer: BitWriter,
) -> int:
    """Serialize one coded channel; returns the number of bits written."""
    start = writer.bit_length
    codes, lens = table.codes, table.lengths
    for b, (lo, hi) in enumerate(groups.edges):
        writer.write_flag(bool(coded.zero_band[b]))
        if coded.zero_band[b]:
            continue
        sf = int(coded.scalefactors[b])
        if not SF_MIN <= sf <= SF_MAX:
            raise StreamError(f"scalefactor {sf} out of range")
        writer.write(sf - SF_MIN, 8)
        values = coded.quant_indices[lo:hi]
        if coded.band_costs is not None and b in coded.band_costs:
            huff_cost, raw_cost, width = coded.band_costs[b]
        else:
            huff_cost, raw_cost, width = _band_costs(values, table)
        # the whole band is packed into one integer before writing
        big = 0
        total = 0
        if huff_cost <= raw_cost:
            writer.write_flag(False)  # Huffman mode
            for v in values.tolist():
                m = v if v >= 0 else -v
                if m >= ESCAPE_SYMBOL:
                    big = (big << lens[ESCAPE_SYMBOL]) | codes[ESCAPE_SYMBOL]
                    total += lens[ESCAPE_SYMBOL]
                    u = m - ESCAPE_SYMBOL + 1
                    nb = u.bit_length()
                    big = (big << (2 * nb - 1)) | u
                    total += 2 * nb - 1
                else:
                    big = (big << lens[m]) | codes[m]
                    total += lens[m]
                if m:
                    big = (big << 1) | (1 if v < 0 else 0)
                    total += 1
        else:
            writer.write_flag(True)  # raw mode
            writer.write(width, 6)
            w1 = width + 1
            for v in values.tolist():
                m = v if v >= 0 else -v
                big = (big << w1) | ((1 if v < 0 else 0) << width) | m
                total += w1
        writer.write(big, total)
    return writer.bit_length - start


def entropy_decode_channel(
    reader: BitReader,
    groups: FrequencyGroups,
    table: HuffmanTable,
) -> CodedChannel:
    """Exact inverse of :func:`entropy_encode_channel`."""
    nb = len(groups.edges)
    num_bins = groups.num_bins
    zero_band = np.zeros(nb, dtype=bool)
    scalefactors = np.zeros(nb, dtype=np.int64)
    qidx = np.zeros(num_bins, dtype=np.int64)
    for b, (lo, hi) in enumerate(groups.edges):
        if reader.read_flag():
            zero_band[b] = True
            continue
        scalefactors[b] = reader.read(8) + SF_MIN
        if reader.read_flag():  # raw mode
            width = reader.read(6)
            for k in range(lo, hi):
                neg = reader.read_flag()
                mag = reader.read(width)
                qidx[k] = -mag if neg else mag
        else:
            for k in range(lo, hi):
                sym = table.read_symbol(reader)
                mag = sym if sym < ESCAPE_SYMBOL else ESCAPE_SYMBOL + reader.read_ue()
                if mag:
                    neg = reader.read_flag()
                    qidx[k] = -mag if neg else mag
    return CodedChannel(
        num_bins=num_bins,
        zero_band=zero_band,
        scalefactors=scalefactors,
        quant_indices=qidx,
    )
