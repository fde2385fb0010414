"""Binary strings over Z_2^N and the fast sign transform behind the Q-function oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BITS = 64  # one machine word; exact bit paths stop here

# SWAR popcount masks for uint64 arrays
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def _check_length(n: int) -> None:
    if not 1 <= n <= MAX_BITS:
        raise ValueError(f"bit length must be in [1, {MAX_BITS}], got {n}")


@dataclass(frozen=True, order=True)
class BitString:
    """Value type for an element of Z_2^N.

    Text form reads left to right as qubit 1..N, so "100" has qubit 1 set.
    Qubit 1 is the most significant bit of the integer index, matching the
    Kronecker order used for statevectors.
    """

    n: int
    bits: int

    def __post_init__(self) -> None:
        _check_length(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"bits {self.bits:#x} out of range for length {self.n}")

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        if not text or text.strip("01"):
            raise ValueError(f"not a 0/1 string: {text!r}")
        return cls(len(text), int(text, 2))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(n, 0)

    @classmethod
    def ones(cls, n: int) -> "BitString":
        _check_length(n)
        return cls(n, (1 << n) - 1)

    def weight(self) -> int:
        return self.bits.bit_count()

    def bit(self, qubit: int) -> int:
        """Bit of qubit `qubit` (1-based, leftmost in the text form)."""
        if not 1 <= qubit <= self.n:
            raise IndexError(f"qubit {qubit} outside 1..{self.n}")
        return (self.bits >> (self.n - qubit)) & 1

    def __xor__(self, other: "BitString") -> "BitString":
        self._check_same(other)
        return BitString(self.n, self.bits ^ other.bits)

    def __and__(self, other: "BitString") -> "BitString":
        self._check_same(other)
        return BitString(self.n, self.bits & other.bits)

    def dot_mod2(self, other: "BitString") -> int:
        self._check_same(other)
        return (self.bits & other.bits).bit_count() & 1

    def complement(self) -> "BitString":
        return BitString(self.n, self.bits ^ ((1 << self.n) - 1))

    def _check_same(self, other: "BitString") -> None:
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")

    def __str__(self) -> str:
        return format(self.bits, f"0{self.n}b")

    def __repr__(self) -> str:  # pragma: no cover
        return f"BitString('{self}')"


def weight(s: BitString) -> int:
    """Number of set bits of s."""
    return s.weight()


def xor(a: BitString, b: BitString) -> BitString:
    return a ^ b


def dot_mod2(a: BitString, b: BitString) -> int:
    return a.dot_mod2(b)


def popcount_u64(values: np.ndarray) -> np.ndarray:
    """Vectorised popcount of a nonnegative integer array (values < 2**63)."""
    v = np.asarray(values).astype(np.uint64)
    v = v - ((v >> np.uint64(1)) & _M1)
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return ((v * _H01) >> np.uint64(56)).astype(np.int64)


def weight_table(n: int) -> np.ndarray:
    """Popcounts of 0 .. 2^n - 1 as an int64 array."""
    if not 1 <= n <= 30:
        raise ValueError(f"table length 2^{n} unreasonable")
    return popcount_u64(np.arange(1 << n, dtype=np.uint64))


def walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis.

    out[alpha] = sum_kappa (-1)^(alpha.kappa) v[kappa].  Applying it twice
    multiplies by the length.  Input length must be a power of two.
    """
    v = np.array(v, copy=True)
    m = v.shape[-1]
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"length {m} is not a power of two")
    h = 1
    while h < m:
        v = v.reshape(v.shape[:-1] + (m // (2 * h), 2, h))
        a = v[..., 0, :].copy()
        b = v[..., 1, :].copy()
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
        v = v.reshape(v.shape[:-3] + (m,))
        h *= 2
    return v
