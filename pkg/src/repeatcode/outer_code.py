"""Index-headed Reed-Solomon outer code.

Each outer symbol is ``index (h bits, big-endian) || RS symbol (q bits)``.
Headers let the decoder place symbols after arbitrary insertions, deletions
and reorderings; missing or conflicting positions become erasures for an
error-and-erasure RS decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BitLike, BitString, as_bits

# primitive polynomials, x^q + ... as bitmasks
PRIMITIVE_POLYS = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053,
}

ERASED = None


class RSDecodeError(Exception):
    """Decoding failed or its output could not be verified."""


class GF2m:
    """GF(2^q) with log/antilog tables; elements are ints in ``[0, 2^q)``."""

    def __init__(self, q: int, poly: Optional[int] = None):
        if poly is None:
            poly = PRIMITIVE_POLYS[q]
        if poly.bit_length() != q + 1:
            raise ValueError(f"polynomial {poly:#x} is not of degree {q}")
        self.q = q
        self.poly = poly
        self.order = (1 << q) - 1
        exp = [0] * (2 * self.order)
        log = [0] * (1 << q)
        v = 1
        for i in range(self.order):
            exp[i] = v
            log[v] = i
            v <<= 1
            if v >> q:
                v ^= poly
        if v != 1 or len(set(exp[: self.order])) != self.order:
            raise ValueError(f"polynomial {poly:#x} is not primitive over GF(2^{q})")
        for i in range(self.order, 2 * self.order):
            exp[i] = exp[i - self.order]
        self.exp = exp
        self.log = log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF(2^q)")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % self.order]

    def inv(self, a: int) -> int:
        return self.div(1, a)

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e else 1
        return self.exp[(self.log[a] * e) % self.order]

    def alpha(self, e: int) -> int:
        return self.exp[e % self.order]

    # polynomials are lists of coefficients, lowest degree first

    def poly_eval(self, p: Sequence[int], x: int) -> int:
        acc = 0
        for c in reversed(p):
            acc = self.mul(acc, x) ^ c
        return acc

    def poly_mul(self, p: Sequence[int], r: Sequence[int]) -> list[int]:
        out = [0] * (len(p) + len(r) - 1)
        for i, a in enumerate(p):
            if a:
                for j, b in enumerate(r):
                    out[i + j] ^= self.mul(a, b)
        return out

    def poly_scale(self, p: Sequence[int], a: int) -> list[int]:
        return [self.mul(c, a) for c in p]

    def poly_add(self, p: Sequence[int], r: Sequence[int]) -> list[int]:
        out = [0] * max(len(p), len(r))
        for i, c in enumerate(p):
            out[i] = c
        for i, c in enumerate(r):
            out[i] ^= c
        return out


@dataclass(frozen=True)
class OuterCodeParams:
    q: int
    n_rs: int
    k_rs: int
    irreducible_poly: int = 0
    field_: GF2m = field(init=False, repr=False, compare=False)
    generator: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.k_rs < self.n_rs <= (1 << self.q) - 1:
            raise ValueError(f"need 0 < k_rs < n_rs <= 2^q - 1, got ({self.n_rs}, {self.k_rs}) q={self.q}")
        poly = self.irreducible_poly or PRIMITIVE_POLYS[self.q]
        object.__setattr__(self, "irreducible_poly", poly)
        gf = GF2m(self.q, poly)
        object.__setattr__(self, "field_", gf)
        g = [1]
        for i in range(self.n_rs - self.k_rs):
            g = gf.poly_mul(g, [gf.alpha(i), 1])
        object.__setattr__(self, "generator", tuple(g))

    @property
    def redundancy(self) -> int:
        return self.n_rs - self.k_rs

    @property
    def header_bits(self) -> int:
        # indices run 1..n_rs, so n_rs itself must fit
        return self.n_rs.bit_length()

    @property
    def symbol_bits(self) -> int:
        return self.header_bits + self.q

    @property
    def data_bits(self) -> int:
        return self.k_rs * self.q

    @property
    def rate(self) -> float:
        """Information bits per transmitted symbol bit."""
        return self.data_bits / (self.n_rs * self.symbol_bits)

    def correctable(self, errors: int, erasures: int) -> bool:
        return 2 * errors + erasures <= self.redundancy

    def to_json(self) -> dict:
        return {"q": self.q, "n_rs": self.n_rs, "k_rs": self.k_rs,
                "irreducible_poly": self.irreducible_poly}

    @classmethod
    def from_json(cls, doc) -> "OuterCodeParams":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(int(doc["q"]), int(doc["n_rs"]), int(doc["k_rs"]), int(doc.get("irreducible_poly", 0)))


# Codewords are lists of n_rs symbols; position p carries the coefficient of
# x^(n_rs - 1 - p). Positions 0..k_rs-1 hold the data (systematic).

def rs_encode(params: OuterCodeParams, data: Sequence[int]) -> list[int]:
    """Systematic encoding: data followed by the remainder modulo the generator."""
    if len(data) != params.k_rs:
        raise ValueError(f"expected {params.k_rs} data symbols, got {len(data)}")
    gf = params.field_
    if any(not 0 <= d <= gf.order for d in data):
        raise ValueError("data symbol out of field range")
    nsym = params.redundancy
    g = params.generator  # monic, lowest degree first
    # long division of data(x) * x^nsym by g(x), highest degree first
    work = list(data) + [0] * nsym
    for i in range(params.k_rs):
        coef = work[i]
        if coef:
            for j in range(1, nsym + 1):
                work[i + j] ^= gf.mul(g[nsym - j], coef)
    return list(data) + work[params.k_rs :]


def _syndromes(params: OuterCodeParams, word: Sequence[int]) -> list[int]:
    gf = params.field_
    n = params.n_rs
    out = []
    for i in range(params.redundancy):
        a = gf.alpha(i)
        acc = 0
        for p in range(n):
            acc = gf.mul(acc, a) ^ word[p]
        out.append(acc)
    return out


def is_codeword(params: OuterCodeParams, word: Sequence[int]) -> bool:
    return not any(_syndromes(params, word))


def _raw_decode(params: OuterCodeParams, received: Sequence[Optional[int]]) -> Optional[list[int]]:
    """Berlekamp-Massey with erasures, Chien search and Forney.

    Returns a corrected word or ``None`` when the algorithm itself detects
    failure. The output is *not* checked against the received word.
    """
    gf = params.field_
    n, nsym = params.n_rs, params.redundancy
    erasures = [p for p, v in enumerate(received) if v is ERASED]
    word = [0 if v is ERASED else int(v) for v in received]
    s = len(erasures)
    if s > nsym:
        return None
    S = _syndromes(params, word)
    if not any(S):
        return word

    def locator_value(p):  # X_p = alpha^(n-1-p)
        return gf.alpha(n - 1 - p)

    gamma = [1]
    for p in erasures:
        gamma = gf.poly_mul(gamma, [1, locator_value(p)])

    lam = list(gamma)
    B = list(gamma)
    L = s
    for r in range(s, nsym):
        delta = 0
        for j in range(min(L, len(lam) - 1) + 1):
            delta ^= gf.mul(lam[j], S[r - j]) if r - j >= 0 else 0
        B = [0] + B
        if delta:
            T = gf.poly_add(lam, gf.poly_scale(B, delta))
            if 2 * L <= r + s:
                B = gf.poly_scale(lam, gf.inv(delta))
                L = r + 1 + s - L
            lam = T
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    degree = len(lam) - 1
    if degree != L or 2 * (L - s) + s > nsym:
        return None

    # Chien search over the valid positions only (shortened codes)
    positions = [p for p in range(n) if gf.poly_eval(lam, gf.inv(locator_value(p))) == 0]
    if len(positions) != degree:
        return None

    omega = gf.poly_mul(S, lam)[:nsym]
    dlam = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]  # formal derivative
    for p in positions:
        X = locator_value(p)
        Xinv = gf.inv(X)
        denom = gf.poly_eval(dlam, Xinv)
        if denom == 0:
            return None
        magnitude = gf.mul(X, gf.div(gf.poly_eval(omega, Xinv), denom))
        word[p] ^= magnitude
    return word


@dataclass(frozen=True)
class RSDecodeResult:
    data: list
    codeword: list
    errors: int
    erasures: int


def verify_decode(params: OuterCodeParams, received: Sequence[Optional[int]], candidate: Sequence[int]) -> Optional[RSDecodeResult]:
    """Re-encode check: ``candidate`` must be a codeword within the decoding radius of ``received``."""
    data = list(candidate[: params.k_rs])
    if rs_encode(params, data) != list(candidate):
        return None
    erasures = sum(v is ERASED for v in received)
    errors = sum(v is not ERASED and v != c for v, c in zip(received, candidate))
    if not params.correctable(errors, erasures):
        return None
    return RSDecodeResult(data, list(candidate), errors, erasures)


def rs_decode(params: OuterCodeParams, received: Sequence[Optional[int]]) -> RSDecodeResult:
    """Error-and-erasure decoding; ``None`` entries are erasures.

    Succeeds whenever ``2 * errors + erasures <= n_rs - k_rs``. Otherwise
    raises :class:`RSDecodeError`, or returns a codeword that is within the
    decoding radius of ``received`` (a miscorrection no decoder can detect).
    """
    if len(received) != params.n_rs:
        raise ValueError(f"expected {params.n_rs} received symbols, got {len(received)}")
    candidate = _raw_decode(params, received)
    if candidate is None:
        raise RSDecodeError("error locator inconsistent")
    result = verify_decode(params, received, candidate)
    if result is None:
        raise RSDecodeError("decoded word failed re-encode verification")
    return result


# -- index-headed symbol layer --------------------------------------------------

def pack_symbol(params: OuterCodeParams, index: int, payload: int) -> BitString:
    return BitString.from_int((index << params.q) | payload, params.symbol_bits)


def unpack_symbol(params: OuterCodeParams, bits: BitLike) -> tuple[int, int]:
    b = as_bits(bits)
    if b.size != params.symbol_bits:
        raise ValueError(f"symbol must have {params.symbol_bits} bits, got {b.size}")
    v = BitString(b).to_int()
    return v >> params.q, v & ((1 << params.q) - 1)


def _bits_to_symbols(params: OuterCodeParams, data_bits: BitLike) -> list[int]:
    b = as_bits(data_bits)
    if b.size != params.data_bits:
        raise ValueError(f"expected {params.data_bits} data bits, got {b.size}")
    return [BitString(b[i * params.q : (i + 1) * params.q]).to_int() for i in range(params.k_rs)]


def _symbols_to_bits(params: OuterCodeParams, symbols: Sequence[int]) -> BitString:
    if not symbols:
        return BitString()
    return BitString(np.concatenate([BitString.from_int(s, params.q).bits for s in symbols]))


def enc_outer(params: OuterCodeParams, data_bits: BitLike) -> list[BitString]:
    """RS-encode ``k_rs * q`` data bits and prefix each symbol with its 1-based index."""
    codeword = rs_encode(params, _bits_to_symbols(params, data_bits))
    return [pack_symbol(params, i + 1, c) for i, c in enumerate(codeword)]


def place_symbols(params: OuterCodeParams, received: Sequence[BitLike]) -> list[Optional[int]]:
    """Slot received symbols by header.

    Out-of-range headers are dropped, conflicting duplicates erase the slot,
    and empty slots are erasures.
    """
    slots: list = [ERASED] * params.n_rs
    conflicted = [False] * params.n_rs
    for item in received:
        index, payload = unpack_symbol(params, item)
        if not 1 <= index <= params.n_rs:
            continue
        p = index - 1
        if conflicted[p]:
            continue
        if slots[p] is ERASED:
            slots[p] = payload
        elif slots[p] != payload:
            slots[p] = ERASED
            conflicted[p] = True
    return slots


def dec_outer(params: OuterCodeParams, received: Sequence[BitLike]) -> BitString:
    """Recover the data bits from any sequence of received symbols."""
    result = rs_decode(params, place_symbols(params, received))
    return _symbols_to_bits(params, result.data)
