import numpy as np
import pytest

from hoacodec.errors import ShapeError
from hoacodec.hoa_io import TimeFrame
from hoacodec.transform import (
    AnalysisWindow,
    SpectralFrame,
    analyze,
    mdct_forward,
    mdct_inverse,
    overlap_add,
    sine_window,
    synthesize,
)


def naive_mdct(z, L):
    """Normative O(L^2) cosine sum; the oracle the fast path must match."""
    out = np.zeros((L, z.shape[1]))
    for k in range(L):
        phase = np.cos(np.pi / L * (np.arange(2 * L) + 0.5 + L / 2) * (k + 0.5))
        out[k] = phase @ z
    return out


def naive_imdct(X, L):
    out = np.zeros((2 * L, X.shape[1]))
    for n in range(2 * L):
        phase = np.cos(np.pi / L * (n + 0.5 + L / 2) * (np.arange(L) + 0.5))
        out[n] = (2.0 / L) * (phase @ X)
    return out


def test_sine_window_princen_bradley():
    for L in (4, 64, 1024):
        sine_window(L).validate(tol=1e-12)


def test_bad_window_rejected():
    w = AnalysisWindow(np.linspace(0, 1, 16))
    with pytest.raises(ShapeError):
        w.validate()


def test_zero_frame_gives_zero_coefficients():
    win = sine_window(32)
    frame = TimeFrame(index=0, samples=np.zeros((64, 3)))
    assert np.all(mdct_forward(frame, win).coeffs == 0.0)


def test_forward_matches_naive_reference(rng):
    L = 64
    win = sine_window(L)
    x = rng.standard_normal((2 * L, 16))
    fast = mdct_forward(TimeFrame(index=0, samples=x), win).coeffs
    ref = naive_mdct(win.values[:, None] * x, L)
    assert np.max(np.abs(fast - ref)) < 1e-9 * np.max(np.abs(ref))


def test_inverse_matches_naive_reference(rng):
    L = 64
    win = sine_window(L)
    X = rng.standard_normal((L, 4))
    fast = mdct_inverse(SpectralFrame(index=0, coeffs=X), win)
    ref = win.values[:, None] * naive_imdct(X, L)
    assert np.max(np.abs(fast - ref)) < 1e-9 * np.max(np.abs(ref))


def test_cosine_input_concentrates_at_its_bin(rng):
    L = 64
    win = sine_window(L)
    k0 = 13
    x = np.cos(np.pi / L * (np.arange(2 * L) + 0.5 + L / 2) * (k0 + 0.5))
    spec = mdct_forward(TimeFrame(index=0, samples=x[:, None]), win).coeffs[:, 0]
    # windowing leaks into neighbors; the peak must still be at k0
    assert np.argmax(np.abs(spec)) == k0
    assert np.abs(spec[k0]) > 10 * np.median(np.abs(spec))


def test_linearity(rng):
    L = 32
    win = sine_window(L)
    x = rng.standard_normal((2 * L, 2))
    y = rng.standard_normal((2 * L, 2))
    a, b = 1.7, -0.4
    lhs = mdct_forward(TimeFrame(index=0, samples=a * x + b * y), win).coeffs
    rhs = a * mdct_forward(TimeFrame(0, x), win).coeffs + b * mdct_forward(TimeFrame(0, y), win).coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * np.max(np.abs(lhs))


def test_shape_mismatch_raises(rng):
    win = sine_window(32)
    with pytest.raises(ShapeError):
        mdct_forward(TimeFrame(index=0, samples=np.zeros((48, 2))), win)
    with pytest.raises(ShapeError):
        mdct_inverse(SpectralFrame(index=0, coeffs=np.zeros((48, 2))), win)


def test_tdac_roundtrip_perfect_reconstruction(rng):
    L = 256
    win = sine_window(L)
    x = rng.standard_normal((10 * L + 37, 4))
    spectra, _ = analyze(x, L, win)
    y = synthesize(spectra, win, x.shape[0])
    rel = np.linalg.norm(y - x) / np.linalg.norm(x)
    assert rel < 1e-9


def test_roundtrip_snr_over_180db(rng):
    L = 128
    win = sine_window(L)
    x = rng.standard_normal((10 * L, 3))
    spectra, _ = analyze(x, L, win)
    y = synthesize(spectra, win, x.shape[0])
    snr = -20 * np.log10(np.linalg.norm(y - x) / np.linalg.norm(x))
    assert snr > 180


def test_overlap_add_of_constant_blocks():
    L = 16
    blocks = [np.ones((2 * L, 1)) for _ in range(3)]
    out = overlap_add(blocks, L, 2 * L)
    # interior overlap sums two blocks of ones
    assert np.all(out == 2.0)


def test_overlap_add_length_arithmetic(rng):
    L = 1024
    blocks = [rng.standard_normal((2 * L, 2)) for _ in range(3)]
    out = overlap_add(blocks, L, 2048)
    assert out.shape == (2048, 2)


def test_parseval_ratio_is_half_frame_length(rng):
    # the frozen regression constant: coefficient energy over windowed
    # energy per frame settles at L/2 for the unnormalized transform
    L = 64
    win = sine_window(L)
    x = rng.standard_normal((20 * L, 2))
    spectra, _ = analyze(x, L, win)
    coef = sum(float(np.sum(sp.coeffs**2)) for sp in spectra)
    windowed = 0.0
    from hoacodec.hoa_io import pad_signal

    padded = pad_signal(x, L)
    for sp in spectra:
        block = padded[sp.index * L : sp.index * L + 2 * L]
        windowed += float(np.sum((win.values[:, None] * block) ** 2))
    assert coef / windowed == pytest.approx(L / 2, rel=1e-9)
