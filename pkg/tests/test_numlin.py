import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoacodec.errors import FormatError, NumericError, ShapeError, TrainingError
from hoacodec.numlin import (
    Codebook,
    distortion,
    gla_train,
    hungarian,
    load_codebook,
    quantize_nearest,
    save_codebook,
    svd,
)


# --- svd ---

def test_identity_singular_values():
    res = svd(np.eye(2))
    assert np.allclose(res.singular_values, [1.0, 1.0])


def test_diagonal_canonical_form():
    res = svd(np.diag([3.0, 2.0]))
    assert np.allclose(res.singular_values, [3.0, 2.0])
    assert np.allclose(res.left, np.eye(2))
    assert np.allclose(res.right, np.eye(2))


def test_reconstruction_and_orthogonality(rng):
    for shape in [(8, 4), (40, 8), (16, 16), (4, 9)]:
        A = rng.standard_normal(shape)
        res = svd(A)
        assert np.linalg.norm(res.reconstruct() - A) < 1e-10 * np.linalg.norm(A)
        k = min(shape)
        assert np.linalg.norm(res.left.T @ res.left - np.eye(k)) < 1e-10
        assert np.linalg.norm(res.right.T @ res.right - np.eye(k)) < 1e-10
        assert np.all(np.diff(res.singular_values) <= 0)
        assert np.all(res.singular_values >= 0)


def test_sign_canonicalization_deterministic(rng):
    A = rng.standard_normal((12, 5))
    r1, r2 = svd(A), svd(A.copy())
    assert np.array_equal(r1.right, r2.right)
    anchors = np.abs(r1.right).argmax(axis=0)
    assert np.all(r1.right[anchors, np.arange(5)] > 0)


def test_truncation_beats_random_factorizations(rng):
    A = rng.standard_normal((20, 6))
    res = svd(A)
    k = 2
    best = (res.left[:, :k] * res.singular_values[:k]) @ res.right[:, :k].T
    err_svd = np.linalg.norm(A - best)
    for _ in range(50):
        Y = rng.standard_normal((20, k))
        Z = rng.standard_normal((6, k))
        coef = np.linalg.lstsq(Y, A, rcond=None)[0]
        assert err_svd <= np.linalg.norm(A - Y @ coef) + 1e-12


def test_non_finite_rejected():
    with pytest.raises(NumericError):
        svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


# --- hungarian ---

def brute_force(cost):
    r = cost.shape[0]
    best = min(
        itertools.permutations(range(r)),
        key=lambda p: (sum(cost[i, p[i]] for i in range(r)), p),
    )
    return list(best), sum(cost[i, best[i]] for i in range(r))


def test_identity_cheapest():
    a = hungarian(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert list(a.permutation) == [0, 1]
    assert a.total_cost == 2.0


def test_swap_cheapest():
    a = hungarian(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert list(a.permutation) == [1, 0]
    assert a.total_cost == 2.0


def test_tie_breaks_lexicographically():
    a = hungarian(np.ones((3, 3)))
    assert list(a.permutation) == [0, 1, 2]


def test_matches_brute_force_on_random_integer_costs(rng):
    for _ in range(40):
        r = int(rng.integers(1, 7))
        cost = rng.integers(0, 10, (r, r)).astype(float)
        a = hungarian(cost)
        perm, total = brute_force(cost)
        assert a.total_cost == pytest.approx(total, abs=1e-9)
        assert list(a.permutation) == perm


def test_non_square_rejected():
    with pytest.raises(ShapeError):
        hungarian(np.zeros((2, 3)))


# --- GLA ---

def test_size_one_codebook_is_mean(rng):
    data = rng.standard_normal((200, 3))
    cb = gla_train(data, 1)
    assert np.allclose(cb.centroids[0], data.mean(axis=0), atol=1e-12)


def test_two_point_training_set_recovered():
    data = np.array([[-1.0], [1.0], [-1.0], [1.0]])
    cb = gla_train(data, 2, seed=3)
    assert np.allclose(sorted(cb.centroids[:, 0]), [-1.0, 1.0])
    assert distortion(data, cb) == 0.0


def test_distortion_history_monotone(rng):
    data = rng.standard_normal((600, 4))
    cb = gla_train(data, 8, seed=1)
    assert len(cb.history) >= 1
    assert np.all(np.diff(cb.history) <= 1e-12)


def test_close_to_best_of_restarts(rng):
    data = rng.standard_normal((1000, 1))
    ours = distortion(data, gla_train(data, 4, seed=0))
    best = min(distortion(data, gla_train(data, 4, seed=s)) for s in range(20))
    assert ours <= best * 1.05


def test_degenerate_flag_when_size_exceeds_distinct_vectors():
    data = np.array([[0.0], [1.0]])
    cb = gla_train(data, 4)
    assert cb.degenerate


def test_empty_training_rejected():
    with pytest.raises(TrainingError):
        gla_train(np.zeros((0, 2)), 2)


# --- nearest quantization ---

def test_exact_centroid_hit():
    cb = Codebook(centroids=np.array([[0.0, 0.0], [1.0, 1.0]]))
    idx, rec = quantize_nearest([1.0, 1.0], cb)
    assert idx == 1 and np.array_equal(rec, [1.0, 1.0])


def test_tie_goes_to_smaller_index():
    cb = Codebook(centroids=np.array([[-1.0], [1.0]]))
    idx, _ = quantize_nearest([0.0], cb)
    assert idx == 0


def test_matches_linear_scan(rng):
    cb = Codebook(centroids=rng.standard_normal((32, 5)))
    for _ in range(50):
        v = rng.standard_normal(5)
        idx, _ = quantize_nearest(v, cb)
        scan = min(range(32), key=lambda i: (np.sum((cb.centroids[i] - v) ** 2), i))
        assert idx == scan


def test_dimension_mismatch_rejected():
    cb = Codebook(centroids=np.zeros((4, 3)))
    with pytest.raises(ShapeError):
        quantize_nearest([1.0, 2.0], cb)


# --- codebook files ---

def test_codebook_file_roundtrip(rng, tmp_path):
    cb = gla_train(rng.standard_normal((300, 6)), 16, seed=42)
    path = tmp_path / "cb.hacb"
    save_codebook(cb, path)
    back = load_codebook(path)
    assert np.array_equal(back.centroids, cb.centroids)
    assert back.seed == 42 and back.degenerate == cb.degenerate


def test_codebook_corrupt_file_rejected(tmp_path):
    path = tmp_path / "bad.hacb"
    path.write_bytes(b"XXXX" + b"\x00" * 40)
    with pytest.raises(FormatError):
        load_codebook(path)
    path.write_bytes(b"HACB" + b"\x00" * 10)
    with pytest.raises(FormatError):
        load_codebook(path)


def test_retraining_same_seed_reproduces_bits(rng, tmp_path):
    data = rng.standard_normal((500, 4))
    a = gla_train(data, 8, seed=9)
    b = gla_train(data, 8, seed=9)
    save_codebook(a, tmp_path / "a.hacb")
    save_codebook(b, tmp_path / "b.hacb")
    assert (tmp_path / "a.hacb").read_bytes() == (tmp_path / "b.hacb").read_bytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 1000))
def test_hungarian_property_vs_brute_force(r, seed):
    rng = np.random.default_rng(seed)
    cost = rng.uniform(0, 1, (r, r))
    a = hungarian(cost)
    _, total = brute_force(cost)
    assert a.total_cost == pytest.approx(total, abs=1e-9)
