"""Full encode/decode orchestration for both codecs plus the container.

Stream layout (all fields MSB-first within bytes, see docs/bitstream.md):

* global header: magic, version, codec id, flags, signal geometry, seeds,
  operating point, codebook/table fingerprints;
* per frame: u32 payload byte count, payload, u32 CRC-32 of the payload.

A frame payload holds the side-info block, the noise-substitution block
(49-bit activity mask plus 6-bit energies), and the entropy-coded
component channels (foreground tracks first, then reduced-order background
channels).  In bypass mode bases and coefficients are stored as raw
float64 instead.

The proposed codec evaluates both band-split modes per frame and keeps the
one with the smaller rate-distortion cost; distortion is mask-weighted
squared reconstruction error over all ambisonic channels, consistent with
the MNMR constraint the core codec enforces.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from hoacodec import baseline_td, core_codec, freq_svd, noise_subst, sideinfo, transform
from hoacodec.bitio import BitReader, BitWriter
from hoacodec.errors import ConfigurationError, StreamError
from hoacodec.hoa_io import HoaSignal, TimeFrame, num_frames, pad_signal
from hoacodec.noise_subst import NUM_GROUPS, FrequencyGroups, NoiseGroupInfo

MAGIC = b"HOAC"
VERSION = 1

CODEC_BASELINE = 0
CODEC_PROPOSED = 1
_CODEC_NAMES = {"baseline": CODEC_BASELINE, "proposed": CODEC_PROPOSED}

_FLAG_BYPASS = 1
_FLAG_HANNING_INTERP = 2

GROUP_TABLE_AAC48K = 0
GROUP_TABLE_UNIFORM = 1

# default RD lambda: calibrated on the synthetic corpus so both band-split
# modes are exercised at the default operating points
DEFAULT_RD_LAMBDA = 1e-4


@dataclass
class EncoderConfig:
    """Everything that parameterizes an encode (and must match at decode)."""

    codec: str = "proposed"
    half_length: int = 1024
    rank: int = 4
    bands: int = 4
    background_order: int = 1
    mnmr: float = 1.0
    flatness_threshold: float = 0.25
    rd_lambda: float = DEFAULT_RD_LAMBDA
    seed: int = 0
    bypass_quantization: bool = False
    interp_window_kind: str = "triangular"
    quantizers: sideinfo.QuantizerSet | None = None
    huffman_table: core_codec.HuffmanTable | None = None
    groups: FrequencyGroups | None = None
    masking: core_codec.MaskingConfig = field(default_factory=core_codec.MaskingConfig)
    force_modes: object = None  # optional per-frame mode override (test/diagnostic hook)

    def codec_id(self) -> int:
        try:
            return _CODEC_NAMES[self.codec]
        except KeyError:
            raise ConfigurationError(f"unknown codec {self.codec!r}") from None

    def resolved_groups(self) -> FrequencyGroups:
        return self.groups or noise_subst.groups_for(self.half_length)

    def group_table_id(self) -> int:
        g = self.resolved_groups()
        if g.offsets == noise_subst.AAC_48K_LONG_OFFSETS:
            return GROUP_TABLE_AAC48K
        return GROUP_TABLE_UNIFORM

    def resolved_table(self) -> core_codec.HuffmanTable:
        return self.huffman_table or core_codec.default_table()

    def num_components(self) -> int:
        return self.rank + (self.background_order + 1) ** 2

    def validate(self, order: int) -> None:
        M = (order + 1) ** 2
        if self.rank < 1 or self.rank > M:
            raise ConfigurationError(f"rank {self.rank} out of range for M={M}")
        if self.background_order > order:
            raise ConfigurationError(
                f"background order {self.background_order} exceeds signal order {order}"
            )
        if self.bands < 2:
            raise ConfigurationError("banded mode needs at least 2 bands")
        if self.codec_id() == CODEC_PROPOSED and self.half_length % self.bands:
            raise ConfigurationError(
                f"half_length must be divisible by the band count {self.bands}"
            )
        if self.half_length // self.bands < self.rank:
            raise ConfigurationError("bands too short to retain rank components")
        if not self.bypass_quantization:
            if self.quantizers is None:
                raise ConfigurationError(
                    "no side-info quantizers configured; train them with "
                    "'hoacodec train-quantizers' and pass --codebooks"
                )
            if self.quantizers.dim != M:
                raise ConfigurationError(
                    f"quantizers trained for {self.quantizers.dim} channels, signal has {M}"
                )
        if self.resolved_groups().num_bins != self.half_length:
            raise ConfigurationError("group table does not match half_length")


@dataclass
class FrameStats:
    index: int
    mode: int
    side_bits: int
    noise_bits: int
    core_bits: int
    padding_bits: int
    total_bits: int  # payload + framing overhead
    rd_cost: float = 0.0
    rd_cost_other: float = 0.0
    concealed: bool = False
    max_nmr: float = 0.0  # encoder-side worst band NMR (0 in bypass)
    escalated_bands: int = 0  # bands where no scalefactor met the target


@dataclass
class StreamStats:
    codec: str
    sample_rate: int
    num_samples: int
    num_channels: int
    header_bits: int
    frames: list = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return self.header_bits + sum(f.total_bits for f in self.frames)

    @property
    def kbps(self) -> float:
        dur = self.num_samples / self.sample_rate if self.num_samples else 0.0
        return self.total_bits / dur / 1000.0 if dur else float("inf")

    @property
    def mode_histogram(self) -> dict:
        hist = {}
        for f in self.frames:
            hist[f.mode] = hist.get(f.mode, 0) + 1
        return hist

    @property
    def side_info_share(self) -> float:
        total = self.total_bits
        return sum(f.side_bits for f in self.frames) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "codec": self.codec,
            "sample_rate": self.sample_rate,
            "num_samples": self.num_samples,
            "num_channels": self.num_channels,
            "total_bits": self.total_bits,
            "kbps": self.kbps,
            "header_bits": self.header_bits,
            "mode_histogram": {str(k): v for k, v in self.mode_histogram.items()},
            "side_info_share": self.side_info_share,
            "frames": [vars(f) for f in self.frames],
        }


@dataclass
class EncodeResult:
    stream: bytes
    stats: StreamStats


# --------------------------------------------------------------------------
# header
# --------------------------------------------------------------------------

@dataclass
class StreamHeader:
    codec_id: int
    flags: int
    sample_rate: int
    order: int
    half_length: int
    rank: int
    bands: int
    background_order: int
    seed: int
    original_length: int
    frame_count: int
    mnmr: float
    rd_lambda: float
    quantizer_fingerprint: int
    table_fingerprint: int
    group_table_id: int

    @property
    def bypass(self) -> bool:
        return bool(self.flags & _FLAG_BYPASS)

    @property
    def interp_kind(self) -> str:
        return "hanning" if self.flags & _FLAG_HANNING_INTERP else "triangular"

    @property
    def num_channels(self) -> int:
        return (self.order + 1) ** 2


def _table_fingerprint(table: core_codec.HuffmanTable) -> int:
    return zlib.crc32(bytes(table.lengths))


def _write_header(w: BitWriter, h: StreamHeader) -> None:
    w.write_bytes(MAGIC)
    w.write(VERSION, 16)
    w.write(h.codec_id, 8)
    w.write(h.flags, 8)
    w.write(h.sample_rate, 32)
    w.write(h.order, 8)
    w.write(h.half_length, 32)
    w.write(h.rank, 8)
    w.write(h.bands, 8)
    w.write(h.background_order, 8)
    w.write(h.seed, 64)
    w.write(h.original_length, 64)
    w.write(h.frame_count, 32)
    w.write_f64(h.mnmr)
    w.write_f64(h.rd_lambda)
    w.write(h.quantizer_fingerprint, 32)
    w.write(h.table_fingerprint, 32)
    w.write(h.group_table_id, 8)

HEADER_BYTES = 4 + 2 + 1 + 1 + 4 + 1 + 4 + 1 + 1 + 1 + 8 + 8 + 4 + 8 + 8 + 4 + 4 + 1


def _read_header(data: bytes) -> StreamHeader:
    if len(data) < HEADER_BYTES or data[:4] != MAGIC:
        raise StreamError("not a hoacodec stream")
    r = BitReader(data[:HEADER_BYTES])
    r.read_bytes(4)
    version = r.read(16)
    if version != VERSION:
        raise StreamError(f"unsupported stream version {version}")
    return StreamHeader(
        codec_id=r.read(8),
        flags=r.read(8),
        sample_rate=r.read(32),
        order=r.read(8),
        half_length=r.read(32),
        rank=r.read(8),
        bands=r.read(8),
        background_order=r.read(8),
        seed=r.read(64),
        original_length=r.read(64),
        frame_count=r.read(32),
        mnmr=r.read_f64(),
        rd_lambda=r.read_f64(),
        quantizer_fingerprint=r.read(32),
        table_fingerprint=r.read(32),
        group_table_id=r.read(8),
    )


# --------------------------------------------------------------------------
# shared payload pieces
# --------------------------------------------------------------------------

def _write_noise_block(w: BitWriter, info: NoiseGroupInfo) -> int:
    start = w.bit_length
    for j in range(NUM_GROUPS):
        w.write_flag(bool(info.active[j]))
    for j in np.flatnonzero(info.active):
        w.write(int(info.energy_indices[j]), noise_subst.ENERGY_BITS)
    return w.bit_length - start


def _read_noise_block(r: BitReader) -> tuple:
    start = r.bit_position
    active = np.array([r.read_flag() for _ in range(NUM_GROUPS)])
    indices = np.zeros(NUM_GROUPS, dtype=np.uint8)
    for j in np.flatnonzero(active):
        indices[j] = r.read(noise_subst.ENERGY_BITS)
    info = NoiseGroupInfo(active=active, energy_indices=indices)
    return info, r.bit_position - start


def _write_raw_matrix(w: BitWriter, m: np.ndarray) -> None:
    for v in np.asarray(m, dtype=np.float64).reshape(-1):
        w.write_f64(v)


def _read_raw_matrix(r: BitReader, shape) -> np.ndarray:
    flat = np.array([r.read_f64() for _ in range(int(np.prod(shape)))])
    return flat.reshape(shape)


def _quantize_components(channels: list, groups, masking_cfg, mnmr, table, bypass):
    """MNMR-quantize the component spectra without serializing.

    Returns (coded list, decoded spectra list, exact payload bit count).
    """
    decoded = []
    coded_list = []
    bits = 0
    max_nmr = 0.0
    escalated = 0
    for spec in channels:
        if bypass:
            coded_list.append(None)
            decoded.append(spec.copy())
            bits += 64 * spec.shape[0]
            continue
        mask = core_codec.masking_threshold(spec, groups, masking_cfg)
        coded = core_codec.quantize_mnmr(spec, mask, mnmr, groups)
        coded_list.append(coded)
        decoded.append(core_codec.dequantize_channel(coded, groups))
        bits += core_codec.channel_cost(coded, groups, table)
        max_nmr = max(max_nmr, float(coded.nmr.max()))
        escalated += int(coded.escalated.sum())
    return coded_list, decoded, bits, max_nmr, escalated


def _write_components(coded_list, channels, groups, table, writer: BitWriter, bypass: bool) -> int:
    start = writer.bit_length
    for coded, spec in zip(coded_list, channels):
        if bypass:
            _write_raw_matrix(writer, spec)
        else:
            core_codec.entropy_encode_channel(coded, groups, table, writer)
    return writer.bit_length - start


def _decode_components(
    reader: BitReader, count: int, groups: FrequencyGroups, table, bypass: bool
):
    decoded = []
    start = reader.bit_position
    for _ in range(count):
        if bypass:
            decoded.append(_read_raw_matrix(reader, (groups.num_bins,)))
        else:
            coded = core_codec.entropy_decode_channel(reader, groups, table)
            decoded.append(core_codec.dequantize_channel(coded, groups))
    return decoded, reader.bit_position - start


def _mask_weighted_error(original: np.ndarray, decoded: np.ndarray, groups, masking_cfg) -> float:
    """Distortion for RD decisions: sum over channels/bands of noise/mask."""
    total = 0.0
    for ch in range(original.shape[1]):
        mask = core_codec.masking_threshold(original[:, ch], groups, masking_cfg)
        total += float(
            np.sum(core_codec.measure_nmr(original[:, ch], decoded[:, ch], mask, groups))
        )
    return total


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------

def encode(signal: HoaSignal, cfg: EncoderConfig) -> EncodeResult:
    """Encode a signal with the configured codec into a container stream."""
    cfg.validate(signal.order)
    codec_id = cfg.codec_id()
    if codec_id == CODEC_PROPOSED:
        frames, stats = _encode_proposed(signal, cfg)
    else:
        frames, stats = _encode_baseline(signal, cfg)

    qfp = cfg.quantizers.fingerprint() if cfg.quantizers is not None else 0
    flags = _FLAG_BYPASS if cfg.bypass_quantization else 0
    if cfg.interp_window_kind == "hanning":
        flags |= _FLAG_HANNING_INTERP
    header = StreamHeader(
        codec_id=codec_id,
        flags=flags,
        sample_rate=signal.sample_rate,
        order=signal.order,
        half_length=cfg.half_length,
        rank=cfg.rank,
        bands=cfg.bands,
        background_order=cfg.background_order,
        seed=cfg.seed,
        original_length=signal.length,
        frame_count=len(frames),
        mnmr=cfg.mnmr,
        rd_lambda=cfg.rd_lambda,
        quantizer_fingerprint=qfp,
        table_fingerprint=_table_fingerprint(cfg.resolved_table()),
        group_table_id=cfg.group_table_id(),
    )
    hw = BitWriter()
    _write_header(hw, header)
    parts = [hw.getvalue()]
    for payload in frames:
        lenw = BitWriter()
        lenw.write(len(payload), 32)
        parts.append(lenw.getvalue())
        parts.append(payload)
        crcw = BitWriter()
        crcw.write(zlib.crc32(payload) & 0xFFFFFFFF, 32)
        parts.append(crcw.getvalue())
    stream = b"".join(parts)
    stats.header_bits = 8 * len(parts[0])
    return EncodeResult(stream=stream, stats=stats)


def _frame_mode(cfg: EncoderConfig, index: int) -> int | None:
    if cfg.force_modes is None:
        return None
    fm = cfg.force_modes
    return int(fm(index)) if callable(fm) else int(fm[index % len(fm)])


def _encode_proposed(signal: HoaSignal, cfg: EncoderConfig):
    L = cfg.half_length
    groups = cfg.resolved_groups()
    table = cfg.resolved_table()
    window = transform.sine_window(L)
    spectra, _ = transform.analyze(signal.samples, L, window)
    state = sideinfo.SideInfoState()
    stats = StreamStats(
        codec="proposed",
        sample_rate=signal.sample_rate,
        num_samples=signal.length,
        num_channels=signal.num_channels,
        header_bits=0,
    )
    payloads = []

    for sp in spectra:
        forced = _frame_mode(cfg, sp.index)
        candidates = (forced,) if forced is not None else (
            freq_svd.MODE_SINGLE_BAND,
            freq_svd.MODE_FOUR_BANDS,
        )
        trials = []
        for mode in candidates:
            w = BitWriter()
            trial_state = _clone_state(state)
            trial = _encode_proposed_frame(
                sp, mode, cfg, groups, table, window, trial_state, w
            )
            distortion = _mask_weighted_error(
                sp.coeffs, trial["decoded"], groups, cfg.masking
            )
            # side + noise already written; channel payload size known exactly
            bits = trial["side_bits"] + trial["noise_bits"] + trial["core_bits"] + 64
            bits += (-(trial["side_bits"] + trial["noise_bits"] + trial["core_bits"])) % 8
            cost = distortion + cfg.rd_lambda * bits
            trials.append((cost, mode, trial, trial_state, w))
        trials.sort(key=lambda t: (t[0], t[1]))  # tie -> mode 0
        cost, mode, trial, new_state, w = trials[0]
        other_cost = trials[1][0] if len(trials) > 1 else cost
        state = new_state
        core_bits = _write_components(
            trial["coded"], trial["channels"], groups, table, w, cfg.bypass_quantization
        )
        assert core_bits == trial["core_bits"]
        payload = w.getvalue()
        payloads.append(payload)
        side_bits, noise_bits = trial["side_bits"], trial["noise_bits"]
        stats.frames.append(
            FrameStats(
                index=sp.index,
                mode=mode,
                side_bits=side_bits,
                noise_bits=noise_bits,
                core_bits=core_bits,
                padding_bits=8 * len(payload) - side_bits - noise_bits - core_bits,
                total_bits=8 * len(payload) + 64,
                rd_cost=cost,
                rd_cost_other=other_cost,
                max_nmr=trial["max_nmr"],
                escalated_bands=trial["escalated"],
            )
        )
    return payloads, stats


def _clone_state(state: sideinfo.SideInfoState) -> sideinfo.SideInfoState:
    clone = sideinfo.SideInfoState()
    clone.prev_mode = state.prev_mode
    if state.prev_bases is not None:
        clone.prev_bases = [b.copy() for b in state.prev_bases]
    return clone


def _encode_proposed_frame(sp, mode, cfg, groups, table, window, state, w: BitWriter):
    """Analyze one frame in one mode: writes side info + noise block into
    ``w``, quantizes the components, and returns everything the RD
    selection and final serialization need."""
    layout = freq_svd.layout_for_mode(mode, cfg.half_length, cfg.bands)
    bands = freq_svd.band_split(sp, layout)
    raw_bases = [
        baseline_td.truncated_basis(band, cfg.rank, sp.index).vectors for band in bands
    ]
    if cfg.bypass_quantization:
        w.write(mode & 1, 1)
        for rb in raw_bases:
            _write_raw_matrix(w, rb)
        side_bits = w.bit_length
        recon = raw_bases
    else:
        _, recon = sideinfo.encode_sideinfo(raw_bases, mode, cfg.quantizers, state, w)
        side_bits = w.bit_length

    dec = freq_svd.band_decompose(
        bands,
        cfg.rank,
        layout,
        bases=[baseline_td.TruncatedBasis(vectors=v, frame=sp.index) for v in recon],
    )
    residual = freq_svd.compute_residual(sp, dec)
    nbg = (cfg.background_order + 1) ** 2
    background = residual[:, :nbg]
    discarded = residual[:, nbg:]

    info = noise_subst.analyze_discarded(discarded, groups, cfg.flatness_threshold)
    noise_bits = _write_noise_block(w, info)

    fg = dec.stacked_foreground()
    channels = [fg[:, k] for k in range(cfg.rank)]
    channels += [background[:, c] for c in range(nbg)]
    coded, decoded_channels, core_bits, max_nmr, escalated = _quantize_components(
        channels, groups, cfg.masking, cfg.mnmr, table, cfg.bypass_quantization
    )

    # deterministic decoder-view reconstruction (noise injection excluded)
    dec_fg = np.stack(decoded_channels[: cfg.rank], axis=1)
    dec_dec = freq_svd.BandDecomposition(
        layout=layout,
        bases=dec.bases,
        foregrounds=[dec_fg[a:b] for a, b in layout.edges],
        dropped=dec.dropped,
    )
    approx = freq_svd.reconstruct_spectrum(dec_dec)
    approx[:, :nbg] += np.stack(decoded_channels[cfg.rank :], axis=1)
    return {
        "side_bits": side_bits,
        "noise_bits": noise_bits,
        "core_bits": core_bits,
        "coded": coded,
        "channels": channels,
        "decoded": approx,
        "max_nmr": max_nmr,
        "escalated": escalated,
    }


def _encode_baseline(signal: HoaSignal, cfg: EncoderConfig):
    L = cfg.half_length
    M = signal.num_channels
    nbg = (cfg.background_order + 1) ** 2
    ndisc = M - nbg
    groups = cfg.resolved_groups()
    table = cfg.resolved_table()
    interp = baseline_td.InterpolationWindow.make(L, cfg.interp_window_kind)
    mdct_win = transform.sine_window(L)

    padded = pad_signal(signal.samples, L)
    F = num_frames(signal.length, L)
    state = sideinfo.SideInfoState()
    prev_basis: baseline_td.TruncatedBasis | None = None

    # pass 1: spatial decomposition into continuous component streams
    fg_stream = np.zeros((F * L + L, cfg.rank))  # extra L zeros for the last core block
    bg_stream = np.zeros((F * L + L, nbg))
    disc_stream = np.zeros((F * L + L, ndisc))
    side_payloads = []
    for f in range(F):
        X = padded[f * L : f * L + 2 * L]
        raw = baseline_td.truncated_basis(X, cfg.rank, f)
        w = BitWriter()
        if cfg.bypass_quantization:
            if prev_basis is None:
                aligned = raw
            else:
                _, _, aligned = baseline_td.match_bases(prev_basis, raw)
            w.write(0, 1)
            _write_raw_matrix(w, aligned.vectors)
            basis = aligned
        else:
            _, recon = sideinfo.encode_sideinfo(
                [raw.vectors], 0, cfg.quantizers, state, w
            )
            basis = baseline_td.TruncatedBasis(vectors=recon[0], frame=f)
        result = baseline_td.decompose_frame(
            X, basis, prev_basis, interp, cfg.background_order, signal.order, raw_basis=raw
        )
        fg_stream[f * L : (f + 1) * L] = result.decomposition.foreground[:L]
        bg_stream[f * L : (f + 1) * L] = result.background[:L]
        disc_stream[f * L : (f + 1) * L] = result.discarded[:L]
        side_payloads.append(w)
        prev_basis = basis

    # pass 2: core-code the streams blockwise (block f covers [fL, fL+2L))
    stats = StreamStats(
        codec="baseline",
        sample_rate=signal.sample_rate,
        num_samples=signal.length,
        num_channels=M,
        header_bits=0,
    )
    payloads = []
    for f in range(F):
        w = side_payloads[f]
        side_bits = w.bit_length
        sl = slice(f * L, f * L + 2 * L)

        def _spec(block):
            return transform.mdct_forward(TimeFrame(index=f, samples=block), mdct_win).coeffs

        fg_spec = _spec(fg_stream[sl])
        bg_spec = _spec(bg_stream[sl])
        disc_spec = _spec(disc_stream[sl]) if ndisc else np.zeros((L, 0))

        info = noise_subst.analyze_discarded(disc_spec, groups, cfg.flatness_threshold)
        noise_bits = _write_noise_block(w, info)

        channels = [fg_spec[:, k] for k in range(cfg.rank)]
        channels += [bg_spec[:, c] for c in range(nbg)]
        coded, _, _, max_nmr, escalated = _quantize_components(
            channels, groups, cfg.masking, cfg.mnmr, table, cfg.bypass_quantization
        )
        core_bits = _write_components(
            coded, channels, groups, table, w, cfg.bypass_quantization
        )
        payload = w.getvalue()
        payloads.append(payload)
        stats.frames.append(
            FrameStats(
                index=f,
                mode=0,
                side_bits=side_bits,
                noise_bits=noise_bits,
                core_bits=core_bits,
                padding_bits=8 * len(payload) - side_bits - noise_bits - core_bits,
                total_bits=8 * len(payload) + 64,
                max_nmr=max_nmr,
                escalated_bands=escalated,
            )
        )
    return payloads, stats


# --------------------------------------------------------------------------
# decoding
# --------------------------------------------------------------------------

@dataclass
class DecodeResult:
    signal: HoaSignal
    stats: StreamStats
    concealed_frames: int = 0


def decode(
    stream: bytes,
    quantizers: sideinfo.QuantizerSet | None = None,
    huffman_table: core_codec.HuffmanTable | None = None,
    groups: FrequencyGroups | None = None,
) -> DecodeResult:
    """Decode a container stream back to an :class:`HoaSignal`.

    CRC-failing frames are concealed by repeating the previous frame's
    decoded spectra; a truncated stream raises :class:`StreamError` whose
    ``partial`` attribute carries the samples decoded so far.
    """
    header = _read_header(stream)
    table = huffman_table or core_codec.default_table()
    if _table_fingerprint(table) != header.table_fingerprint:
        raise ConfigurationError("Huffman table does not match the stream")
    if groups is None:
        if header.group_table_id == GROUP_TABLE_AAC48K:
            groups = FrequencyGroups.aac_48k_long()
        else:
            groups = FrequencyGroups.uniform(header.half_length)
    if not header.bypass:
        if quantizers is None:
            raise ConfigurationError(
                "stream was coded with trained quantizers; pass the codebook directory"
            )
        if quantizers.fingerprint() != header.quantizer_fingerprint:
            raise ConfigurationError("codebooks do not match the stream fingerprint")

    payloads, frame_sizes, truncated = _split_frames(stream, header)
    if header.codec_id == CODEC_PROPOSED:
        samples, stats, concealed = _decode_proposed(header, payloads, quantizers, table, groups)
    else:
        samples, stats, concealed = _decode_baseline(header, payloads, quantizers, table, groups)

    signal = HoaSignal(
        sample_rate=header.sample_rate, order=header.order, samples=samples
    )
    if truncated:
        raise StreamError(
            f"stream truncated after {len(payloads)} of {header.frame_count} frames",
            partial=signal,
        )
    return DecodeResult(signal=signal, stats=stats, concealed_frames=concealed)


def _split_frames(stream: bytes, header: StreamHeader):
    """Frame payloads with CRC verdicts: list of (payload, crc_ok)."""
    out = []
    pos = HEADER_BYTES
    truncated = False
    sizes = []
    for _ in range(header.frame_count):
        if pos + 4 > len(stream):
            truncated = True
            break
        size = int.from_bytes(stream[pos : pos + 4], "big")
        if pos + 4 + size + 4 > len(stream):
            truncated = True
            break
        payload = stream[pos + 4 : pos + 4 + size]
        crc = int.from_bytes(stream[pos + 4 + size : pos + 8 + size], "big")
        out.append((payload, (zlib.crc32(payload) & 0xFFFFFFFF) == crc))
        sizes.append(size)
        pos += 8 + size
    return out, sizes, truncated


def _decode_proposed(header, payloads, quantizers, table, groups):
    L = header.half_length
    M = header.num_channels
    nbg = (header.background_order + 1) ** 2
    rank = header.rank
    state = sideinfo.SideInfoState()
    ranks = {0: [rank], 1: [rank] * header.bands}
    window = transform.sine_window(L)
    stats = StreamStats(
        codec="proposed",
        sample_rate=header.sample_rate,
        num_samples=header.original_length,
        num_channels=M,
        header_bits=8 * HEADER_BYTES,
    )
    spectra = []
    prev_spectrum = np.zeros((L, M))
    concealed = 0
    for f, (payload, crc_ok) in enumerate(payloads):
        parsed = None
        if crc_ok:
            try:
                r = BitReader(payload)
                if header.bypass:
                    mode = r.read(1)
                    layout = freq_svd.layout_for_mode(mode, L, header.bands)
                    bases = [_read_raw_matrix(r, (M, rank)) for _ in range(layout.n)]
                    side_bits = r.bit_position
                else:
                    frame_info, bases = sideinfo.decode_sideinfo(r, quantizers, state, ranks)
                    mode = frame_info.mode
                    layout = freq_svd.layout_for_mode(mode, L, header.bands)
                    side_bits = r.bit_position
                info, noise_bits = _read_noise_block(r)
                decoded, core_bits = _decode_components(
                    r, rank + nbg, groups, table, header.bypass
                )
                parsed = True
            except StreamError:
                # a damaged prediction chain can leave later frames
                # unparseable; treat them like CRC failures
                parsed = None
        if parsed is None:
            concealed += 1
            spectra.append(prev_spectrum.copy())
            stats.frames.append(
                FrameStats(
                    index=f, mode=-1, side_bits=0, noise_bits=0, core_bits=0,
                    padding_bits=8 * len(payload),
                    total_bits=8 * len(payload) + 64, concealed=True,
                )
            )
            continue
        fg = np.stack(decoded[:rank], axis=1)
        S = np.zeros((L, M))
        for (a, b), basis in zip(layout.edges, bases):
            S[a:b] = fg[a:b] @ basis.T
        S[:, :nbg] += np.stack(decoded[rank:], axis=1)
        ndisc = M - nbg
        if ndisc:
            S[:, nbg:] += noise_subst.synthesize_noise(
                info, groups, ndisc, header.seed, f, channel_offset=nbg
            )
        spectra.append(S)
        prev_spectrum = S
        stats.frames.append(
            FrameStats(
                index=f, mode=mode, side_bits=side_bits, noise_bits=noise_bits,
                core_bits=core_bits,
                padding_bits=8 * len(payload) - side_bits - noise_bits - core_bits,
                total_bits=8 * len(payload) + 64,
            )
        )
    if not spectra:
        return np.zeros((0, M)), stats, concealed
    frames = [transform.SpectralFrame(index=f, coeffs=S) for f, S in enumerate(spectra)]
    samples = transform.synthesize(frames, window, header.original_length)
    return samples, stats, concealed


def _decode_baseline(header, payloads, quantizers, table, groups):
    L = header.half_length
    M = header.num_channels
    nbg = (header.background_order + 1) ** 2
    ndisc = M - nbg
    rank = header.rank
    F = len(payloads)
    state = sideinfo.SideInfoState()
    mdct_win = transform.sine_window(L)
    interp = baseline_td.InterpolationWindow.make(L, header.interp_kind)
    stats = StreamStats(
        codec="baseline",
        sample_rate=header.sample_rate,
        num_samples=header.original_length,
        num_channels=M,
        header_bits=8 * HEADER_BYTES,
    )

    bases_seq = []
    fg_blocks, bg_blocks, disc_blocks = [], [], []
    prev_components = None
    concealed = 0
    for f, (payload, crc_ok) in enumerate(payloads):
        parsed = None
        if crc_ok:
            try:
                r = BitReader(payload)
                if header.bypass:
                    r.read(1)
                    basis = _read_raw_matrix(r, (M, rank))
                    side_bits = r.bit_position
                else:
                    _, recon = sideinfo.decode_sideinfo(r, quantizers, state, [rank])
                    basis = recon[0]
                    side_bits = r.bit_position
                info, noise_bits = _read_noise_block(r)
                decoded, core_bits = _decode_components(
                    r, rank + nbg, groups, table, header.bypass
                )
                parsed = True
            except StreamError:
                parsed = None
        if parsed is None:
            concealed += 1
            comps = prev_components if prev_components is not None else {
                "fg": np.zeros((L, rank)),
                "bg": np.zeros((L, nbg)),
                "disc": np.zeros((L, ndisc)),
            }
            bases_seq.append(bases_seq[-1] if bases_seq else np.full((M, rank), np.nan))
            fg_blocks.append(comps["fg"].copy())
            bg_blocks.append(comps["bg"].copy())
            disc_blocks.append(comps["disc"].copy())
            stats.frames.append(
                FrameStats(
                    index=f, mode=0, side_bits=0, noise_bits=0, core_bits=0,
                    padding_bits=8 * len(payload),
                    total_bits=8 * len(payload) + 64, concealed=True,
                )
            )
            continue
        fg_blocks.append(np.stack(decoded[:rank], axis=1))
        bg_blocks.append(np.stack(decoded[rank:], axis=1))
        disc_blocks.append(
            noise_subst.synthesize_noise(info, groups, ndisc, header.seed, f, channel_offset=nbg)
            if ndisc
            else np.zeros((L, 0))
        )
        bases_seq.append(basis)
        prev_components = {"fg": fg_blocks[-1], "bg": bg_blocks[-1], "disc": disc_blocks[-1]}
        stats.frames.append(
            FrameStats(
                index=f, mode=0, side_bits=side_bits, noise_bits=noise_bits,
                core_bits=core_bits,
                padding_bits=8 * len(payload) - side_bits - noise_bits - core_bits,
                total_bits=8 * len(payload) + 64,
            )
        )

    # component streams via IMDCT + overlap-add; stream sample n needs
    # blocks n//L - 1 and n//L, so [0, L) is zero by construction
    def _stream(blocks, width):
        if not blocks:
            return np.zeros((0, width))
        out = np.zeros((F * L + L, width))
        for f, coeffs in enumerate(blocks):
            block = transform.mdct_inverse(
                transform.SpectralFrame(index=f, coeffs=coeffs), mdct_win
            )
            out[f * L : f * L + 2 * L] += block
        out[:L] = 0.0
        return out

    fg_stream = _stream(fg_blocks, rank)
    bg_stream = _stream(bg_blocks, nbg)
    disc_stream = _stream(disc_blocks, ndisc)

    hoa = np.zeros((F * L, M))
    prev_basis = None
    for f in range(F):
        basis = bases_seq[f]
        if np.any(np.isnan(basis)):
            basis = prev_basis if prev_basis is not None else np.zeros((M, rank))
        cur = baseline_td.TruncatedBasis(vectors=basis, frame=f)
        prev = baseline_td.TruncatedBasis(vectors=prev_basis, frame=f - 1) if prev_basis is not None else cur
        per_sample = baseline_td.interpolate_basis(prev, cur, interp)
        sl = slice(f * L, (f + 1) * L)
        hoa[sl] = np.einsum("lr,lmr->lm", fg_stream[sl], per_sample)
        hoa[sl, :nbg] += bg_stream[sl]
        if ndisc:
            hoa[sl, nbg:] += disc_stream[sl]
        prev_basis = basis
    samples = hoa[L : L + header.original_length]
    return samples, stats, concealed


# --------------------------------------------------------------------------
# mode selection and stream measurement
# --------------------------------------------------------------------------

def select_mode(candidates, rd_lambda: float) -> int:
    """argmin over (distortion, bits) pairs of D + lambda * R; tie -> mode 0."""
    costs = [d + rd_lambda * r for d, r in candidates]
    best = min(range(len(costs)), key=lambda i: (costs[i], i))
    return best


def measure_stream(
    stream: bytes,
    quantizers: sideinfo.QuantizerSet | None = None,
    huffman_table: core_codec.HuffmanTable | None = None,
) -> StreamStats:
    """Exact per-frame bit accounting of an existing stream.

    Runs the structural parts of the decoder (side info, noise block,
    entropy decode) without any signal reconstruction; category sums plus
    framing overhead equal the container size exactly.
    """
    header = _read_header(stream)
    table = huffman_table or core_codec.default_table()
    groups = (
        FrequencyGroups.aac_48k_long()
        if header.group_table_id == GROUP_TABLE_AAC48K
        else FrequencyGroups.uniform(header.half_length)
    )
    if not header.bypass and quantizers is None:
        raise ConfigurationError("measure_stream needs the stream's codebooks")
    payloads, _, truncated = _split_frames(stream, header)
    if truncated:
        raise StreamError("stream truncated; cannot account bits")
    state = sideinfo.SideInfoState()
    rank = header.rank
    M = header.num_channels
    nbg = (header.background_order + 1) ** 2
    ranks = {0: [rank], 1: [rank] * header.bands}
    stats = StreamStats(
        codec="proposed" if header.codec_id == CODEC_PROPOSED else "baseline",
        sample_rate=header.sample_rate,
        num_samples=header.original_length,
        num_channels=M,
        header_bits=8 * HEADER_BYTES,
    )
    for f, (payload, crc_ok) in enumerate(payloads):
        if not crc_ok:
            raise StreamError(f"frame {f}: CRC mismatch")
        r = BitReader(payload)
        if header.bypass:
            mode = r.read(1)
            nbands = header.bands if (header.codec_id == CODEC_PROPOSED and mode == 1) else 1
            for _ in range(nbands):
                _read_raw_matrix(r, (M, rank))
            side_bits = r.bit_position
        else:
            si_ranks = ranks if header.codec_id == CODEC_PROPOSED else {0: [rank], 1: [rank]}
            frame_info, _ = sideinfo.decode_sideinfo(r, quantizers, state, si_ranks)
            mode = frame_info.mode
            side_bits = r.bit_position
        _, noise_bits = _read_noise_block(r)
        _, core_bits = _decode_components(r, rank + nbg, groups, table, header.bypass)
        stats.frames.append(
            FrameStats(
                index=f, mode=mode, side_bits=side_bits, noise_bits=noise_bits,
                core_bits=core_bits,
                padding_bits=8 * len(payload) - side_bits - noise_bits - core_bits,
                total_bits=8 * len(payload) + 64,
            )
        )
    return stats
