"""Small balanced inner codes with exact maximum-likelihood decoding.

Codebooks are drawn at random from the balanced words (every window of
length ``floor(zeta * block_len)`` has ones fraction in ``[gamma, 1 - gamma]``)
and the best of several candidates, measured by Monte Carlo decoding failure,
is kept. Decoding scores every codeword against the trimming channel law.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .channels import (
    DOBRUSHIN, REPEAT, TRIMMING_DOBRUSHIN, TRIMMING_REPEAT, ChannelModel, SeedLike,
    apply_traced, likelihood_tdc,
)
from .core import BitLike, BitString, as_bits

MAX_MSG_BITS = 12
MAX_BLOCK_LEN = 64
PROBE_LIMIT = 1_000_000
LOG3 = math.log(3.0)


class InfeasibleParametersError(ValueError):
    pass


class CodeBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecodeResult:
    msg: int
    log_likelihood: float
    second_best_gap: float
    uninformative: bool = False


@dataclass
class InnerCode:
    msg_bits_m: int
    block_len: int
    codebook: np.ndarray  # (2^m, block_len) uint8
    zeta: float
    gamma: float
    model: ChannelModel  # trimming law the decoder scores against
    est_failure_prob: float = float("nan")
    est_stderr: float = float("nan")
    search_seed: Optional[int] = None
    max_zero_run: Optional[int] = None
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        cb = np.ascontiguousarray(self.codebook, dtype=np.uint8)
        if cb.shape != (2 ** self.msg_bits_m, self.block_len):
            raise ValueError(f"codebook shape {cb.shape} != ({2 ** self.msg_bits_m}, {self.block_len})")
        cb.flags.writeable = False
        self.codebook = cb

    @property
    def size(self) -> int:
        return self.codebook.shape[0]

    @property
    def rate(self) -> float:
        return self.msg_bits_m / self.block_len

    def _visit_order(self, y: np.ndarray, pmf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Weight bounds per row and the rows sorted by decreasing bound."""
        if self._lookup is None:
            weights = self.codebook.sum(axis=1)
            groups = [np.flatnonzero(weights == w) for w in range(self.block_len + 1)]
            self._lookup = {"weights": weights, "groups": groups, "tables": {}}
        cache = self._lookup
        wy = int(y.sum())
        hit = cache["tables"].get(wy)
        if hit is None:
            table = _weight_table(self.block_len, wy, pmf)
            rank = np.argsort(-table, kind="stable")
            order = np.concatenate([cache["groups"][w] for w in rank]).astype(np.int64)
            hit = cache["tables"][wy] = (table[cache["weights"]], order)
        return hit

    def codeword(self, msg: int) -> BitString:
        return BitString(self.codebook[msg])

    def to_json(self) -> dict:
        return {
            "msg_bits_m": self.msg_bits_m,
            "block_len": self.block_len,
            "zeta": self.zeta,
            "gamma": self.gamma,
            "max_zero_run": self.max_zero_run,
            "model": self.model.to_json(),
            "est_failure_prob": self.est_failure_prob,
            "est_stderr": self.est_stderr,
            "search_seed": self.search_seed,
            "codebook": [str(BitString(w)) for w in self.codebook],
        }

    @classmethod
    def from_json(cls, doc) -> "InnerCode":
        if isinstance(doc, str):
            doc = json.loads(doc)
        codebook = np.array([as_bits(w) for w in doc["codebook"]], dtype=np.uint8)
        return cls(
            int(doc["msg_bits_m"]), int(doc["block_len"]), codebook,
            float(doc["zeta"]), float(doc["gamma"]), ChannelModel.from_json(doc["model"]),
            float(doc.get("est_failure_prob", "nan")), float(doc.get("est_stderr", "nan")),
            doc.get("search_seed"), doc.get("max_zero_run"),
        )


# -- word screening -------------------------------------------------------------

def balanced_mask(words: np.ndarray, zeta: float, gamma: float) -> np.ndarray:
    """Row-wise balance check for a batch of words."""
    n = words.shape[1]
    L = int(math.floor(zeta * n))
    if L < 1:
        raise InfeasibleParametersError(f"window length floor({zeta} * {n}) is zero")
    csum = np.concatenate([np.zeros((words.shape[0], 1), np.int64), np.cumsum(words, axis=1)], axis=1)
    w = csum[:, L:] - csum[:, :-L]
    return ((w >= gamma * L) & (w <= (1 - gamma) * L)).all(axis=1)


def interior_zero_run_mask(words: np.ndarray, limit: int) -> np.ndarray:
    """True for rows whose zero runs between ones are all shorter than ``limit``."""
    ok = np.ones(words.shape[0], dtype=bool)
    for r, w in enumerate(words):
        ones = np.flatnonzero(w)
        if ones.size > 1 and (np.diff(ones) - 1).max() >= limit:
            ok[r] = False
    return ok


def _check_params(m: int, block_len: int, zeta: float, gamma: float) -> None:
    if not 0 < gamma < 0.5:
        raise InfeasibleParametersError(f"gamma must be in (0, 1/2), got {gamma}")
    if not 0 < zeta < 1:
        raise InfeasibleParametersError(f"zeta must be in (0, 1), got {zeta}")
    if m < 1 or m > MAX_MSG_BITS:
        raise CodeBudgetError(f"msg bits {m} outside [1, {MAX_MSG_BITS}]")
    if block_len > MAX_BLOCK_LEN:
        raise CodeBudgetError(f"block length {block_len} exceeds {MAX_BLOCK_LEN}")
    if block_len < m:
        raise InfeasibleParametersError("block length shorter than message")


def sample_admissible_words(rng: np.random.Generator, block_len: int, zeta: float, gamma: float,
                            count: int, max_zero_run: Optional[int] = None,
                            limit: int = PROBE_LIMIT) -> np.ndarray:
    """``count`` distinct uniformly random admissible words, by rejection."""
    found: dict[bytes, np.ndarray] = {}
    drawn = 0
    batch = 4096
    while len(found) < count:
        if drawn >= limit:
            raise InfeasibleParametersError(
                f"only {len(found)} admissible words in {drawn} draws (need {count})")
        words = rng.integers(0, 2, size=(batch, block_len), dtype=np.uint8)
        drawn += batch
        keep = balanced_mask(words, zeta, gamma)
        if max_zero_run is not None:
            keep[keep] = interior_zero_run_mask(words[keep], max_zero_run)
        for w in words[keep]:
            key = w.tobytes()
            if key not in found:
                found[key] = w
                if len(found) == count:
                    break
    return np.array(list(found.values()), dtype=np.uint8)


# -- likelihood kernels ---------------------------------------------------------

@numba.njit(cache=True)
def _trc_loglik_kernel(codebook, y, pmf, order, bounds, prune, prune_on_best=False):
    """Natural-log ``P(TRIM(RC x) = y)`` for the rows of ``codebook`` listed in ``order``.

    With ``prune`` set, rows are visited in ``order`` and the scan stops once
    ``bounds[row]`` (an upper bound on the log-likelihood) drops below the
    runner-up found so far (the leader, with ``prune_on_best``). A row is also
    abandoned mid-recursion once the probability mass still in flight cannot
    reach that mark. Unvisited and abandoned rows are left at ``-inf``.
    """
    C, L = codebook.shape
    m = y.shape[0]
    R = pmf.shape[0]
    out = np.full(C, -np.inf)
    p0 = pmf[0]
    logp0 = np.log(p0) if p0 > 0 else -np.inf
    if m > 0 and (y[0] != 1 or y[m - 1] != 1):
        return out
    if m > L * (R - 1):
        return out
    runs = np.zeros((2, m + 1), dtype=np.int64)
    for j in range(1, m + 1):
        b = y[j - 1]
        runs[b, j] = runs[b, j - 1] + 1
        runs[1 - b, j] = 0
    logpmf = np.full(R, -np.inf)
    for r in range(R):
        if pmf[r] > 0:
            logpmf[r] = np.log(pmf[r])
    T = np.zeros(m + 1)
    new = np.zeros(m + 1)
    rmax = R - 1
    greedy = True
    for r in range(R):
        if pmf[r] <= 0.0:
            greedy = False
    best = -np.inf
    second = -np.inf
    for t in range(order.shape[0]):
        c = order[t]
        if prune and bounds[c] < (best if prune_on_best else second):
            break
        x = codebook[c]
        total = 0
        for i in range(L):
            total += x[i]
        if m == 0:
            if total == 0:
                out[c] = 0.0
            elif p0 > 0:
                out[c] = total * logp0
            if out[c] > best:
                second = best
                best = out[c]
            elif out[c] > second:
                second = out[c]
            continue
        if greedy:
            # with every count in 0..rmax allowed, greedy matching decides reachability
            j = 0
            for i in range(L):
                cnt = 0
                while cnt < rmax and j < m and y[j] == x[i]:
                    j += 1
                    cnt += 1
            if j < m:
                continue
        # T is non-zero only on [tlo, thi]
        tlo, thi = 1, 0
        logscale = 0.0
        acc = -np.inf
        k = 0
        for i in range(L):
            b = x[i]
            lo = m - (L - 1 - i) * rmax
            if lo < 1:
                lo = 1
            hi = (i + 1) * rmax
            if hi > m:
                hi = m
            smax = 0.0
            for j in range(lo, hi + 1):
                s = 0.0
                for r in range(R):
                    jr = j - r
                    if jr < tlo:
                        break
                    p = pmf[r]
                    if p == 0.0 or jr > thi:
                        continue
                    if r == 0:
                        s += p * T[j]
                    elif runs[b, j] >= r:
                        s += p * T[jr]
                new[j] = s
            if b == 1 and (k == 0 or p0 > 0):
                base = (k * logp0 if k > 0 else 0.0) - logscale
                top = -np.inf
                for r in range(lo, R):
                    if r <= hi and pmf[r] > 0 and runs[1, r] >= r:
                        v = logpmf[r] + base
                        if v > top:
                            top = v
                if top > 0.0:
                    f = np.exp(-top)
                    for j in range(lo, hi + 1):
                        new[j] *= f
                    logscale += top
                    base -= top
                for r in range(lo, R):
                    if r <= hi and pmf[r] > 0 and runs[1, r] >= r:
                        new[r] += np.exp(logpmf[r] + base)
            if b == 1 and hi == m:
                done = new[m]
                if done > 0.0:
                    rest = total - k - 1
                    tail = rest * logp0 if rest > 0 else 0.0
                    v = np.log(done) + logscale + tail
                    if v > acc:
                        acc = v + np.log1p(np.exp(acc - v))
                    elif v > -np.inf:
                        acc = acc + np.log1p(np.exp(v - acc))
            if hi == m:
                new[m] = 0.0
            k += b
            for j in range(tlo, thi + 1):
                T[j] = 0.0
            for j in range(lo, hi + 1):
                if new[j] > smax:
                    smax = new[j]
            if smax > 0.0:
                inv = 1.0 / smax
                for j in range(lo, hi + 1):
                    T[j] = new[j] * inv
                    new[j] = 0.0
                logscale += np.log(smax)
                tlo, thi = lo, hi
            else:
                for j in range(lo, hi + 1):
                    new[j] = 0.0
                tlo, thi = 1, 0
            if prune and i < L - 1:
                # the mass still in flight bounds what this row can reach
                limit = best if prune_on_best else second
                if limit > -np.inf:
                    top = acc
                    if thi >= tlo:
                        v = logscale + np.log(thi - tlo + 1.0)
                        if v > top:
                            top = v
                    if k == 0:
                        top = 0.0
                    elif p0 > 0:
                        v = k * logp0
                        if v > top:
                            top = v
                    if top + LOG3 < limit:
                        acc = -np.inf
                        break
        out[c] = acc
        if acc > best:
            second = best
            best = acc
        elif acc > second:
            second = acc
    return out


def _weight_table(L: int, wy: int, pmf: np.ndarray) -> np.ndarray:
    """``log P(output weight = wy)`` for an input of weight ``0..L``."""
    conv = np.zeros((L + 1, wy + 1))
    conv[0, 0] = 1.0
    for w in range(1, L + 1):
        conv[w] = np.convolve(conv[w - 1], pmf)[: wy + 1]
    with np.errstate(divide="ignore"):
        # slack absorbs rounding between this and the recursion
        return np.log(conv[:, wy]) + 1e-9


def _weight_bounds(codebook: np.ndarray, y: np.ndarray, pmf: np.ndarray) -> np.ndarray:
    """Log of ``P(output weight = w(y))`` per codeword; bounds the trimming likelihood from above."""
    table = _weight_table(codebook.shape[1], int(y.sum()), pmf)
    return table[codebook.sum(axis=1)]


def _trc_loglik_batch(codebook: np.ndarray, y: np.ndarray, pmf: np.ndarray) -> np.ndarray:
    order = np.arange(codebook.shape[0], dtype=np.int64)
    return _trc_loglik_kernel(codebook, y, pmf, order, np.zeros(0), False)


def _fragment_masks(frags, target: np.ndarray, wild_lo: int, wild_hi: int) -> list[np.ndarray]:
    E = target.size
    masks = []
    for frag, _ in frags:
        L = frag.size
        mask = np.zeros(E + 1, dtype=bool)
        if L == 0:
            mask[:] = True
        for j in range(L, E + 1) if L else ():
            pos = np.arange(j - L, j)
            care = (pos >= wild_lo) & (pos < wild_hi)
            mask[j] = bool((target[j - L : j][care] == frag[care]).all())
        masks.append(mask)
    return masks


def tdc_loglik_batch(model: ChannelModel, codebook: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Natural-log trimming-Dobrushin likelihood of ``y`` for every codeword, vectorized over rows."""
    C, L = codebook.shape
    d0, d1 = model.d0, model.d1
    if model.kind == TRIMMING_DOBRUSHIN:
        tl_pmf, tr_pmf = model.trim_left.pmf, model.trim_right.pmf
    else:
        tl_pmf = tr_pmf = np.array([1.0])
    if y.size == 0:
        return np.log(np.array([likelihood_tdc(model, w, y) for w in codebook]))
    # One pass covers every left trim: the state starts at offset max_tl - tl
    # with weight P(tl), and the first max_tl target positions are wildcards.
    max_tl, max_tr = tl_pmf.size - 1, tr_pmf.size - 1
    target = np.concatenate([np.zeros(max_tl, np.uint8), y, np.zeros(max_tr, np.uint8)])
    E = target.size
    hi = max_tl + y.size
    masks = {0: _fragment_masks(d0.fragments, target, max_tl, hi),
             1: _fragment_masks(d1.fragments, target, max_tl, hi)}
    T = np.zeros((C, E + 1))
    T[:, max_tl - np.arange(max_tl + 1)] = tl_pmf
    logscale = np.zeros(C)
    for i in range(L):
        news = []
        for b, dist in ((0, d0), (1, d1)):
            new = np.zeros_like(T)
            for (frag, p), mask in zip(dist.fragments, masks[b]):
                k = frag.size
                if k == 0:
                    new += p * T
                elif k <= E:
                    new[:, k:] += p * T[:, : E + 1 - k] * mask[k:]
            news.append(new)
        T = np.where(codebook[:, i : i + 1] == 1, news[1], news[0])
        s = T.max(axis=1)
        s = np.where(s > 0, s, 1.0)
        T /= s[:, None]
        logscale += np.log(s)
    total = T[:, hi : hi + max_tr + 1] @ tr_pmf
    with np.errstate(divide="ignore"):
        return np.log(total) + logscale


def codebook_loglik(code: InnerCode, y: BitLike) -> np.ndarray:
    yb = np.ascontiguousarray(as_bits(y), dtype=np.uint8)
    model = code.model
    if model.kind == TRIMMING_REPEAT:
        return _trc_loglik_batch(code.codebook, yb, np.ascontiguousarray(model.repeat_dist.pmf))
    if model.kind in (TRIMMING_DOBRUSHIN, DOBRUSHIN):
        return tdc_loglik_batch(model, code.codebook, yb)
    raise ValueError(f"inner decoding needs a trimming model, got {model.kind}")


# -- encoder / decoder ----------------------------------------------------------

def enc_inner(code: InnerCode, msg: int) -> BitString:
    if not 0 <= msg < code.size:
        raise ValueError(f"message {msg} outside [0, {code.size})")
    return BitString(code.codebook[msg])


def dec_inner_ml(code: InnerCode, y: BitLike, exact_gap: bool = True) -> DecodeResult:
    """Maximum-likelihood message; ties go to the smallest index.

    ``second_best_gap`` is the log-likelihood margin to the runner-up
    (``inf`` when the runner-up has probability zero). For repeat channels,
    codewords whose output-weight bound cannot beat the current runner-up are
    skipped; the decision and gap are unchanged by this. With
    ``exact_gap=False`` the scan stops as soon as no remaining codeword can
    beat the leader, which is faster; the reported gap is then only an upper
    bound.
    """
    if code.model.kind == TRIMMING_REPEAT:
        yb = np.ascontiguousarray(as_bits(y), dtype=np.uint8)
        pmf = np.ascontiguousarray(code.model.repeat_dist.pmf)
        bounds, order = code._visit_order(yb, pmf)
        ll = _trc_loglik_kernel(code.codebook, yb, pmf, order, bounds, True, not exact_gap)
    else:
        ll = codebook_loglik(code, y)
    best = int(np.argmax(ll))
    top = float(ll[best])
    if not np.isfinite(top):
        return DecodeResult(0, -math.inf, 0.0, uninformative=True)
    if ll.size > 1:
        rest = np.delete(ll, best)
        second = float(rest.max())
        gap = top - second if np.isfinite(second) else math.inf
    else:
        gap = math.inf
    return DecodeResult(best, top, gap)


@dataclass(frozen=True)
class FailureEstimate:
    p_hat: float
    stderr: float
    trials: int
    failures: int


def _failure_run(codebook: np.ndarray, code: InnerCode, channel: ChannelModel,
                 messages: np.ndarray, seeds: list) -> int:
    trial_code = code if codebook is code.codebook else _with_codebook(code, codebook)
    failures = 0
    for msg, s in zip(messages, seeds):
        y, _ = apply_traced(channel, codebook[msg], np.random.default_rng(s))
        if dec_inner_ml(trial_code, y).msg != msg:
            failures += 1
    return failures


def _with_codebook(code: InnerCode, codebook: np.ndarray) -> InnerCode:
    return InnerCode(code.msg_bits_m, code.block_len, codebook, code.zeta, code.gamma, code.model,
                     max_zero_run=code.max_zero_run)


def _trial_streams(seed: SeedLike, trials: int, size: int):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    msg_ss, chan_ss = ss.spawn(2)
    messages = np.random.default_rng(msg_ss).integers(0, size, size=trials)
    seeds = chan_ss.spawn(trials)
    return messages, seeds


def estimate_failure(code: InnerCode, trials: int, seed: SeedLike = 0,
                     channel: Optional[ChannelModel] = None) -> FailureEstimate:
    """Monte Carlo block failure rate of ML decoding over ``channel`` (default: the code's own model)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    channel = channel or code.model
    messages, seeds = _trial_streams(seed, trials, code.size)
    failures = _failure_run(code.codebook, code, channel, messages, seeds)
    p = failures / trials
    return FailureEstimate(p, math.sqrt(p * (1 - p) / trials), trials, failures)


def decoding_model(model: ChannelModel) -> ChannelModel:
    """The trimming law an inner decoder should score against."""
    if model.kind == REPEAT:
        return model.trimming()
    return model


def search_inner_code(model: ChannelModel, m: int, block_len: int, zeta: float = 0.5, gamma: float = 0.25,
                      num_candidates: int = 4, mc_trials: int = 500, seed: int = 0,
                      max_zero_run: Optional[int] = None) -> InnerCode:
    """Best of ``num_candidates`` random balanced codebooks by estimated ML failure.

    All candidates see the same messages and channel draws. ``max_zero_run``
    additionally rejects words with an interior zero run of that length or more.
    """
    _check_params(m, block_len, zeta, gamma)
    dmodel = decoding_model(model)
    ss = np.random.SeedSequence(seed)
    probe_ss, code_ss, eval_ss = ss.spawn(3)
    # feasibility: at least one admissible word must turn up
    sample_admissible_words(np.random.default_rng(probe_ss), block_len, zeta, gamma, 1, max_zero_run)
    size = 2 ** m
    best: Optional[InnerCode] = None
    best_fail = math.inf
    messages, seeds = _trial_streams(eval_ss, mc_trials, size)
    for cand_ss in code_ss.spawn(num_candidates):
        words = sample_admissible_words(np.random.default_rng(cand_ss), block_len, zeta, gamma, size, max_zero_run)
        cand = InnerCode(m, block_len, words, zeta, gamma, dmodel, search_seed=seed, max_zero_run=max_zero_run)
        fails = _failure_run(cand.codebook, cand, dmodel, messages, seeds) if mc_trials else 0
        if fails < best_fail:
            best, best_fail = cand, fails
    p = best_fail / mc_trials if mc_trials else 0.0
    best.est_failure_prob = p
    best.est_stderr = math.sqrt(p * (1 - p) / mc_trials) if mc_trials else 0.0
    return best
