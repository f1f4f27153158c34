"""Concatenated code: outer symbols, inner codewords, zero buffers.

Encoding lays out ``c_1 0^b c_2 0^b ... 0^b c_k'``. Decoding cuts the received
string at buffers (long zero runs in repeat mode, low ones-density windows in
Dobrushin mode), ML-decodes each piece with the inner code and hands the
resulting symbols to the index-headed outer decoder.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BitLike, BitString, as_bits, trim_bounds, window_weights, zero_runs
from .inner_code import DecodeResult, InnerCode, dec_inner_ml
from .outer_code import (
    OuterCodeParams, RSDecodeError, _symbols_to_bits, enc_outer, place_symbols, rs_decode,
)

REPEAT_MODE = "repeat"
DOBRUSHIN_MODE = "dobrushin"

# weights of the four error types in the worst-case edit accounting
TAXONOMY_WEIGHTS = (3, 1, 3, 2)


class ConcatParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ConcatParams:
    inner: InnerCode
    outer: OuterCodeParams
    eta: float
    mode: str = REPEAT_MODE
    nu: float = 1.0
    kappa: float = 0.0

    @property
    def block_len(self) -> int:
        return self.inner.block_len

    @property
    def buffer_len_b(self) -> int:
        return int(round(self.eta * self.inner.block_len))

    @property
    def k_prime(self) -> int:
        return self.outer.n_rs

    @property
    def total_len_n(self) -> int:
        return self.k_prime * (self.block_len + self.buffer_len_b) - self.buffer_len_b

    @property
    def mu(self) -> float:
        return self.inner.model.mean_output_length

    @property
    def buffer_threshold(self) -> int:
        return int(math.floor(self.mu / 2 * self.eta * self.block_len))

    @property
    def window_len(self) -> int:
        return int(round(self.nu * self.eta * self.block_len))

    @property
    def ones_fraction_f(self) -> float:
        return self.inner.model.ones_fraction_f

    @property
    def density_threshold(self) -> float:
        return self.ones_fraction_f + self.kappa

    @property
    def message_bits(self) -> int:
        return self.outer.data_bits

    @property
    def realized_rate(self) -> float:
        return self.message_bits / self.total_len_n

    def summary(self) -> dict:
        out = {
            "mode": self.mode,
            "eta": self.eta,
            "block_len": self.block_len,
            "msg_bits_m": self.inner.msg_bits_m,
            "buffer_len_b": self.buffer_len_b,
            "k_prime": self.k_prime,
            "total_len_n": self.total_len_n,
            "message_bits": self.message_bits,
            "realized_rate": self.realized_rate,
            "outer_rate": self.outer.rate,
            "inner_rate": self.inner.rate,
        }
        if self.mode == REPEAT_MODE:
            out["buffer_threshold"] = self.buffer_threshold
        else:
            out.update(nu=self.nu, kappa=self.kappa, window_len=self.window_len,
                       density_threshold=self.density_threshold)
        return out

    def to_json(self) -> dict:
        return {
            "eta": self.eta, "mode": self.mode, "nu": self.nu, "kappa": self.kappa,
            "outer": self.outer.to_json(), "inner": self.inner.to_json(),
        }

    @classmethod
    def from_json(cls, doc) -> "ConcatParams":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return build_params(InnerCode.from_json(doc["inner"]), OuterCodeParams.from_json(doc["outer"]),
                            float(doc["eta"]), doc.get("mode", REPEAT_MODE),
                            float(doc.get("nu", 1.0)), float(doc.get("kappa", 0.0)))


def build_params(inner: InnerCode, outer: OuterCodeParams, eta: float, mode: str = REPEAT_MODE,
                 nu: float = 1.0, kappa: float = 0.0) -> ConcatParams:
    """Validate the wiring and derive the layout.

    In repeat mode every codeword is also scanned for an interior zero run
    long enough to be mistaken for a buffer.
    """
    if inner.msg_bits_m != outer.symbol_bits:
        raise ConcatParamsError(
            f"inner code carries {inner.msg_bits_m} bits but outer symbols have {outer.symbol_bits}")
    if not 0 < eta < 1:
        raise ConcatParamsError(f"eta must be in (0, 1), got {eta}")
    params = ConcatParams(inner, outer, eta, mode, nu, kappa)
    if params.buffer_len_b < 1:
        raise ConcatParamsError("buffer length rounds to zero")
    if mode == REPEAT_MODE:
        if not inner.model.is_repeat:
            raise ConcatParamsError("repeat mode needs a repeat-channel inner code")
        thr = params.buffer_threshold
        if thr < 1:
            raise ConcatParamsError(f"buffer threshold floor(mu/2 * eta * block_len) = {thr} < 1")
        for w in inner.codebook:
            ones = np.flatnonzero(w)
            if ones.size > 1 and (np.diff(ones) - 1).max() >= thr:
                raise ConcatParamsError(
                    f"codeword {BitString(w)} has an interior zero run of at least {thr}")
    elif mode == DOBRUSHIN_MODE:
        model = inner.model
        if not model.is_biased:
            raise ConcatParamsError("Dobrushin mode needs a biased channel")
        f = model.ones_fraction_f
        if not f < 0.5:
            raise ConcatParamsError(f"ones fraction f = {f} is not below 1/2")
        if not 0 < kappa < 0.5 - f:
            raise ConcatParamsError(f"kappa must be in (0, {0.5 - f:.6g}), got {kappa}")
        if nu <= 0 or params.window_len < 1:
            raise ConcatParamsError("window length rounds to zero")
    else:
        raise ConcatParamsError(f"unknown mode {mode!r}")
    return params


# -- encoding -------------------------------------------------------------------

def outer_symbols(params: ConcatParams, message: BitLike) -> list[int]:
    """Outer symbols (header || payload) as integers, in transmission order."""
    return [BitString(s).to_int() for s in enc_outer(params.outer, message)]


def encode(params: ConcatParams, message: BitLike) -> BitString:
    bits = as_bits(message)
    if bits.size != params.message_bits:
        raise ValueError(f"message must have {params.message_bits} bits, got {bits.size}")
    buf = np.zeros(params.buffer_len_b, dtype=np.uint8)
    parts = []
    for j, sym in enumerate(outer_symbols(params, bits)):
        if j:
            parts.append(buf)
        parts.append(params.inner.codebook[sym])
    return BitString(np.concatenate(parts))


def layout(params: ConcatParams) -> np.ndarray:
    """Index of the inner word each transmitted position belongs to; ``-1 - j`` marks buffer ``j``."""
    L, b = params.block_len, params.buffer_len_b
    out = np.empty(params.total_len_n, dtype=np.int64)
    for j in range(params.k_prime):
        start = j * (L + b)
        out[start : start + L] = j
        if j < params.k_prime - 1:
            out[start + L : start + L + b] = -1 - j
    return out


# -- segmentation ---------------------------------------------------------------

def segment_spans(params: ConcatParams, y: BitLike) -> list[tuple[int, int]]:
    """Half-open spans of the received inner words, in order; empty pieces are dropped."""
    bits = as_bits(y)
    if params.mode == REPEAT_MODE:
        buffers = [(a, b) for a, b in zero_runs(bits) if b - a >= params.buffer_threshold]
    else:
        buffers = _density_buffers(bits, params.window_len, params.density_threshold)
    spans = []
    cursor = 0
    for a, b in buffers:
        if a > cursor:
            spans.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < bits.size:
        spans.append((cursor, bits.size))
    return spans


def _density_buffers(bits: np.ndarray, window: int, threshold: float) -> list[tuple[int, int]]:
    """Buffer spans from a sliding ones-density window.

    A buffer opens at the first bit of the window that drops below the
    threshold and closes after the last bit of the window that climbs back.
    """
    if bits.size < window:
        return []
    low = window_weights(bits, window) < threshold * window
    spans = []
    s = 0
    n_win = low.size
    while s < n_win:
        if not low[s]:
            s += 1
            continue
        start = s
        while s < n_win and low[s]:
            s += 1
        stop = s + window if s < n_win else bits.size
        spans.append((start, min(stop, bits.size)))
    return spans


def segment(params: ConcatParams, y: BitLike) -> list[BitString]:
    bits = as_bits(y)
    return [BitString(bits[a:b]) for a, b in segment_spans(params, bits)]


def _decode_spans(params: ConcatParams, bits: np.ndarray) -> list[tuple[int, int]]:
    """Spans handed to the inner decoder; repeat mode trims edge zeros (the TRC law)."""
    spans = segment_spans(params, bits)
    if params.mode != REPEAT_MODE:
        return spans
    out = []
    for a, b in spans:
        lo, hi = trim_bounds(bits[a:b])
        if hi > lo:
            out.append((a + lo, a + hi))
    return out


# -- decoding -------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorTaxonomy:
    type1_buffer_lost: int = 0
    type2_codeword_vanished: int = 0
    type3_spurious_buffer: int = 0
    type4_inner_decode_fail: int = 0

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.type1_buffer_lost, self.type2_codeword_vanished,
                self.type3_spurious_buffer, self.type4_inner_decode_fail)

    @property
    def weighted_edit_distance(self) -> int:
        return sum(w * c for w, c in zip(TAXONOMY_WEIGHTS, self.counts))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["weighted_edit_distance"] = self.weighted_edit_distance
        return d


@dataclass
class DecodeOutcome:
    message: Optional[BitString]
    spans: list
    inner: list
    symbols: list
    taxonomy: Optional[ErrorTaxonomy] = None
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.message is not None


def decode(params: ConcatParams, y: BitLike, origin: Optional[np.ndarray] = None,
           transmitted_symbols: Optional[Sequence[int]] = None) -> DecodeOutcome:
    """Segment, inner-decode and outer-decode ``y``.

    Passing the channel's ``origin`` map together with the transmitted
    symbols turns on instrumentation and fills in the error taxonomy.
    """
    bits = as_bits(y)
    spans = _decode_spans(params, bits)
    results = [dec_inner_ml(params.inner, bits[a:b], exact_gap=False) for a, b in spans]
    symbols = [r.msg for r in results]
    taxonomy = None
    if origin is not None and transmitted_symbols is not None:
        taxonomy = classify_errors(params, origin, spans, symbols, transmitted_symbols)
    received = [BitString.from_int(s, params.outer.symbol_bits) for s in symbols]
    try:
        result = rs_decode(params.outer, place_symbols(params.outer, received))
    except RSDecodeError as exc:
        return DecodeOutcome(None, spans, results, symbols, taxonomy, str(exc))
    message = _symbols_to_bits(params.outer, result.data)
    return DecodeOutcome(message, spans, results, symbols, taxonomy)


def classify_errors(params: ConcatParams, origin: np.ndarray, spans: Sequence[tuple[int, int]],
                    decoded: Sequence[int], transmitted_symbols: Sequence[int]) -> ErrorTaxonomy:
    """Count the four error events from the ground-truth alignment.

    ``origin[k]`` is the transmitted position behind received bit ``k``.
    A piece holding output of several inner words is a lost buffer (one per
    extra word); a word spread over several pieces, or a piece made only of
    buffer output, is a spurious buffer; a word with no output in any piece
    vanished; a piece that is exactly one whole word but decodes to the wrong
    symbol is an inner failure.
    """
    if origin is None:
        raise ValueError("classification needs the channel's origin map")
    owner = layout(params)
    k = params.k_prime
    pieces_of_word: list[set] = [set() for _ in range(k)]
    words_of_piece = []
    for s, (a, b) in enumerate(spans):
        src = owner[np.asarray(origin[a:b], dtype=np.int64)]
        words = set(int(w) for w in np.unique(src[src >= 0]))
        words_of_piece.append(words)
        for w in words:
            pieces_of_word[w].add(s)
    t1 = sum(max(0, len(ws) - 1) for ws in words_of_piece)
    t2 = sum(1 for ps in pieces_of_word if not ps)
    t3 = sum(max(0, len(ps) - 1) for ps in pieces_of_word) + sum(1 for ws in words_of_piece if not ws)
    t4 = 0
    for s, ws in enumerate(words_of_piece):
        if len(ws) == 1:
            (w,) = ws
            if len(pieces_of_word[w]) == 1 and decoded[s] != transmitted_symbols[w]:
                t4 += 1
    return ErrorTaxonomy(t1, t2, t3, t4)
