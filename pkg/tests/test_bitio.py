import itertools

import pytest
from hypothesis import given, strategies as st

from hoacodec.bitio import (
    BitReader,
    BitWriter,
    factorial_bits,
    lehmer_decode,
    lehmer_encode,
)
from hoacodec.errors import StreamError


def test_write_read_fixed_fields():
    w = BitWriter()
    w.write(0b101, 3)
    w.write_flag(True)
    w.write(0xDEAD, 16)
    data = w.getvalue()
    r = BitReader(data)
    assert r.read(3) == 0b101
    assert r.read_flag() is True
    assert r.read(16) == 0xDEAD


def test_value_too_wide_rejected():
    w = BitWriter()
    with pytest.raises(ValueError):
        w.write(4, 2)


def test_exp_golomb_roundtrip():
    w = BitWriter()
    values = [0, 1, 2, 3, 7, 8, 100, 4095]
    for v in values:
        w.write_ue(v)
    signed = [0, 1, -1, 5, -17, 1000, -1000]
    for v in signed:
        w.write_se(v)
    r = BitReader(w.getvalue())
    assert [r.read_ue() for _ in values] == values
    assert [r.read_se() for _ in signed] == signed


def test_f64_roundtrip():
    w = BitWriter()
    for v in (0.0, -1.5, 3.141592653589793, 1e-300, -2e300):
        w.write_f64(v)
    r = BitReader(w.getvalue())
    for v in (0.0, -1.5, 3.141592653589793, 1e-300, -2e300):
        assert r.read_f64() == v


def test_read_past_end_raises():
    r = BitReader(b"\xff")
    r.read(8)
    with pytest.raises(StreamError):
        r.read(1)


def test_peek_does_not_consume():
    r = BitReader(b"\xa5")
    assert r.peek(4) == 0xA
    assert r.read(4) == 0xA
    assert r.peek(8) == 0x50  # zero-padded past the end
    assert r.read(4) == 0x5


@given(st.lists(st.tuples(st.integers(0, 2**20 - 1), st.integers(1, 20)), max_size=60))
def test_arbitrary_field_sequences_roundtrip(fields):
    w = BitWriter()
    for value, nbits in fields:
        w.write(value & ((1 << nbits) - 1), nbits)
    r = BitReader(w.getvalue())
    for value, nbits in fields:
        assert r.read(nbits) == value & ((1 << nbits) - 1)


@pytest.mark.parametrize("r", [1, 2, 3, 4, 5])
def test_lehmer_codes_all_permutations(r):
    for perm in itertools.permutations(range(r)):
        rank = lehmer_encode(perm)
        assert rank < 2 ** factorial_bits(r)
        assert lehmer_decode(rank, r) == list(perm)


def test_lehmer_is_lexicographic():
    perms = sorted(itertools.permutations(range(4)))
    ranks = [lehmer_encode(p) for p in perms]
    assert ranks == list(range(24))
