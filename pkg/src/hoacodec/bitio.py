"""MSB-first bit packing used by the side-info, core-codec and container layers.

All multi-bit fields are written most-significant-bit first so the byte
stream is unambiguous and independent of host endianness.
"""

from __future__ import annotations

import struct

from hoacodec.errors import StreamError


class BitWriter:
    """Accumulates bits MSB-first and flushes them into a bytearray."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits < 0 or (nbits < 64 and value >> nbits):
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | int(value)
        self._nacc += nbits
        while self._nacc >= 8:
            self._nacc -= 8
            self._buf.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def write_flag(self, flag: bool) -> None:
        self.write(1 if flag else 0, 1)

    def write_ue(self, value: int) -> None:
        """Unsigned Exp-Golomb: zero-prefixed binary of value+1."""
        if value < 0:
            raise ValueError("write_ue needs a non-negative value")
        v = value + 1
        nb = v.bit_length()
        self.write(0, nb - 1)
        self.write(v, nb)

    def write_se(self, value: int) -> None:
        """Signed Exp-Golomb via the usual zigzag map."""
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def write_f64(self, value: float) -> None:
        self.write(int.from_bytes(struct.pack(">d", value), "big"), 64)

    def write_bytes(self, data: bytes) -> None:
        for b in data:
            self.write(b, 8)

    @property
    def bit_length(self) -> int:
        return 8 * len(self._buf) + self._nacc

    def getvalue(self) -> bytes:
        """Byte-align with zero padding and return the buffer."""
        if self._nacc:
            pad = 8 - self._nacc
            self.write(0, pad)
        return bytes(self._buf)


class BitReader:
    """Reads MSB-first bit fields from a bytes object."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # in bits

    def read(self, nbits: int) -> int:
        end = self._pos + nbits
        if end > 8 * len(self._data):
            raise StreamError("bitstream exhausted")
        value = 0
        pos = self._pos
        while nbits:
            byte = self._data[pos >> 3]
            avail = 8 - (pos & 7)
            take = min(avail, nbits)
            shift = avail - take
            value = (value << take) | ((byte >> shift) & ((1 << take) - 1))
            pos += take
            nbits -= take
        self._pos = pos
        return value

    def read_flag(self) -> bool:
        return bool(self.read(1))

    def peek(self, nbits: int) -> int:
        """Read without consuming; bits past the end are zero-padded."""
        save = self._pos
        avail = 8 * len(self._data) - save
        if avail >= nbits:
            value = self.read(nbits)
        else:
            value = self.read(avail) << (nbits - avail) if avail > 0 else 0
        self._pos = save
        return value

    def skip(self, nbits: int) -> None:
        if self._pos + nbits > 8 * len(self._data):
            raise StreamError("bitstream exhausted")
        self._pos += nbits

    def read_ue(self) -> int:
        zeros = 0
        while not self.read(1):
            zeros += 1
            if zeros > 64:
                raise StreamError("malformed Exp-Golomb code")
        v = 1 << zeros
        if zeros:
            v |= self.read(zeros)
        return v - 1

    def read_se(self) -> int:
        u = self.read_ue()
        return (u + 1) // 2 if u % 2 else -(u // 2)

    def read_f64(self) -> float:
        return struct.unpack(">d", self.read(64).to_bytes(8, "big"))[0]

    def read_bytes(self, n: int) -> bytes:
        return bytes(self.read(8) for _ in range(n))

    @property
    def bit_position(self) -> int:
        return self._pos

    @property
    def bits_left(self) -> int:
        return 8 * len(self._data) - self._pos


def lehmer_encode(perm) -> int:
    """Rank a permutation of 0..r-1 in lexicographic order."""
    perm = list(perm)
    r = len(perm)
    rank = 0
    remaining = list(range(r))
    for i, p in enumerate(perm):
        idx = remaining.index(p)
        rank = rank * (r - i) + idx
        remaining.pop(idx)
    return rank


def lehmer_decode(rank: int, r: int) -> list[int]:
    """Inverse of :func:`lehmer_encode`."""
    digits = []
    for base in range(1, r + 1):
        digits.append(rank % base)
        rank //= base
    digits.reverse()
    remaining = list(range(r))
    return [remaining.pop(d) for d in digits]


def factorial_bits(r: int) -> int:
    """ceil(log2 r!): bits needed for a Lehmer index of a length-r permutation."""
    f = 1
    for i in range(2, r + 1):
        f *= i
    return (f - 1).bit_length()
