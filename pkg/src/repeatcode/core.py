"""Bit-level primitives: bit strings, trimming, Hamming weight and window balance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np


class BitString:
    """Immutable sequence of bits.

    Backed by a read-only ``uint8`` array. Substrings use 1-indexed inclusive
    bounds, so ``x.substring(i, j)`` is the block ``x_i .. x_j``.
    """

    __slots__ = ("_bits", "_hash")

    def __init__(self, bits: Union[str, Iterable[int], np.ndarray, "BitString"] = ()):
        if isinstance(bits, BitString):
            arr = bits._bits
        elif isinstance(bits, str):
            if bits and set(bits) - {"0", "1"}:
                raise ValueError(f"not a bit string: {bits!r}")
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
            if arr.size and ((arr != 0) & (arr != 1)).any():
                raise ValueError("bits must be 0 or 1")
        arr = np.array(arr, dtype=np.uint8).reshape(-1)
        arr.flags.writeable = False
        self._bits = arr
        self._hash = None

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.size)

    def __str__(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, str):
            other = BitString(other)
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._bits.tobytes())
        return self._hash

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(np.concatenate([self._bits, as_bits(other)]))

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return BitString(self._bits[idx])
        return int(self._bits[idx])

    def substring(self, i: int, j: int) -> "BitString":
        if not 1 <= i <= j <= len(self):
            raise IndexError(f"substring({i}, {j}) out of range for length {len(self)}")
        return BitString(self._bits[i - 1 : j])

    @property
    def weight(self) -> int:
        return int(self._bits.sum(dtype=np.int64))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitString":
        """Big-endian encoding of ``value`` in ``width`` bits."""
        if value < 0 or value >= 1 << width:
            raise ValueError(f"{value} does not fit in {width} bits")
        return cls([(value >> (width - 1 - k)) & 1 for k in range(width)])

    def to_int(self) -> int:
        out = 0
        for b in self._bits:
            out = (out << 1) | int(b)
        return out


BitLike = Union[BitString, str, np.ndarray, Iterable[int]]


def as_bits(x: BitLike) -> np.ndarray:
    """Return the bits of ``x`` as a ``uint8`` array (no copy for BitString)."""
    if isinstance(x, BitString):
        return x.bits
    if isinstance(x, np.ndarray) and x.dtype == np.uint8:
        return x
    return BitString(x).bits


@dataclass(frozen=True)
class TrimResult:
    trimmed: BitString
    left_cut: int
    right_cut: int


def weight(x: BitLike) -> int:
    """Hamming weight."""
    return int(as_bits(x).sum(dtype=np.int64))


def trim(x: BitLike) -> TrimResult:
    """Strip the maximal all-zero prefix and suffix.

    An all-zero input is cut entirely on the left: ``left_cut = len(x)``.
    """
    bits = as_bits(x)
    ones = np.flatnonzero(bits)
    if ones.size == 0:
        return TrimResult(BitString(), int(bits.size), 0)
    lo, hi = int(ones[0]), int(ones[-1])
    return TrimResult(BitString(bits[lo : hi + 1]), lo, int(bits.size) - hi - 1)


def trim_bounds(bits: np.ndarray) -> tuple[int, int]:
    """Half-open ``(start, stop)`` of the trimmed part of ``bits``; ``(n, n)`` if all zero."""
    ones = np.flatnonzero(bits)
    if ones.size == 0:
        return bits.size, bits.size
    return int(ones[0]), int(ones[-1]) + 1


def window_weights(bits: np.ndarray, window: int) -> np.ndarray:
    """Weights of every full length-``window`` window, by prefix sums."""
    csum = np.concatenate([[0], np.cumsum(bits, dtype=np.int64)])
    return csum[window:] - csum[:-window]


def check_balance(x: BitLike, zeta: float, gamma: float) -> bool:
    """True iff every window of length ``floor(zeta * len(x))`` has weight in
    ``[gamma * L, (1 - gamma) * L]``.

    All ``len(x) - L + 1`` full windows are checked.
    """
    bits = as_bits(x)
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must be in (0, 1)")
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must be in (0, 1/2)")
    L = int(np.floor(zeta * bits.size))
    if L < 1:
        raise ValueError(f"window length floor({zeta} * {bits.size}) is zero")
    w = window_weights(bits, L)
    return bool(((w >= gamma * L) & (w <= (1.0 - gamma) * L)).all())


def max_zero_run(x: BitLike, interior: bool = False) -> int:
    """Longest run of zeros. With ``interior=True`` only runs bounded by ones on both sides count."""
    bits = as_bits(x)
    if interior:
        lo, hi = trim_bounds(bits)
        bits = bits[lo:hi]
    if bits.size == 0:
        return 0
    padded = np.concatenate([[1], bits, [1]]).astype(np.int8)
    ones = np.flatnonzero(padded)
    return int((np.diff(ones) - 1).max())


def zero_runs(bits: np.ndarray) -> list[tuple[int, int]]:
    """Half-open spans of the maximal zero runs in ``bits``."""
    if bits.size == 0:
        return []
    padded = np.concatenate([[1], bits, [1]]).astype(np.int8)
    edges = np.diff((padded == 0).astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [(int(a), int(b)) for a, b in zip(starts, stops)]
