"""Exact mutual information at small blocklengths.

Transition tables are materialized by propagating the output law one input
bit at a time. ``maximize_mi`` runs Blahut-Arimoto with the usual duality-gap
stopping rule. All quantities are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import (
    REPEAT, TRIMMING_DOBRUSHIN, TRIMMING_REPEAT, ChannelModel, RepeatDistribution,
)
from .core import trim

DEFAULT_CELL_BUDGET = 20_000_000


class ResourceBudgetError(RuntimeError):
    """The requested table would exceed the configured size budget."""


@dataclass(frozen=True)
class TransitionTable:
    n: int
    outputs: tuple  # output strings, column order
    matrix: np.ndarray  # matrix[x, j] = P(outputs[j] | x), x read big-endian

    def __post_init__(self):
        if self.matrix.shape != (2 ** self.n, len(self.outputs)):
            raise ValueError("table shape does not match blocklength/outputs")

    @property
    def inputs(self) -> list[str]:
        return [format(i, f"0{self.n}b") if self.n else "" for i in range(2 ** self.n)]

    def row(self, x: str) -> dict[str, float]:
        i = int(x, 2) if x else 0
        return {y: float(p) for y, p in zip(self.outputs, self.matrix[i]) if p > 0}


def _input_strings(n: int) -> list[str]:
    return [format(i, f"0{n}b") if n else "" for i in range(2 ** n)]


def output_law(model: ChannelModel, x: str, budget: int = DEFAULT_CELL_BUDGET) -> dict[str, float]:
    """Exact output distribution for one input, by per-bit fragment propagation."""
    if model.is_repeat:
        pmf = model.repeat_dist.pmf
        frags = {b: [(b * r, float(p)) for r, p in enumerate(pmf) if p > 0] for b in "01"}
    else:
        frags = {
            "0": [(_s(f), p) for f, p in model.d0.fragments],
            "1": [(_s(f), p) for f, p in model.d1.fragments],
        }
    law = {"": 1.0}
    for b in x:
        nxt: dict[str, float] = {}
        for prefix, p in law.items():
            for frag, q in frags[b]:
                key = prefix + frag
                nxt[key] = nxt.get(key, 0.0) + p * q
        law = nxt
        if len(law) > budget:
            raise ResourceBudgetError(f"output law for {x!r} exceeds {budget} entries")
    if model.kind == TRIMMING_REPEAT:
        trimmed: dict[str, float] = {}
        for y, p in law.items():
            key = str(trim(y).trimmed)
            trimmed[key] = trimmed.get(key, 0.0) + p
        law = trimmed
    elif model.kind == TRIMMING_DOBRUSHIN:
        cut: dict[str, float] = {}
        for y, p in law.items():
            for tl, pl in enumerate(model.trim_left.pmf):
                for tr, pr in enumerate(model.trim_right.pmf):
                    if pl * pr == 0:
                        continue
                    stop = len(y) - tr
                    key = y[tl:stop] if stop >= tl else ""
                    cut[key] = cut.get(key, 0.0) + p * pl * pr
        law = cut
    return law


def _s(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def build_transition_table(model: ChannelModel, n: int, budget: int = DEFAULT_CELL_BUDGET) -> TransitionTable:
    """Materialize ``P(y | x)`` for every ``x`` in ``{0,1}^n``.

    Raises :class:`ResourceBudgetError` before allocating anything larger than
    ``budget`` cells.
    """
    if n < 0:
        raise ValueError("blocklength must be non-negative")
    rows = []
    support: dict[str, int] = {}
    for x in _input_strings(n):
        law = output_law(model, x, budget)
        rows.append(law)
        for y in law:
            if y not in support:
                support[y] = len(support)
        if len(support) * 2 ** n > budget:
            raise ResourceBudgetError(
                f"transition table for n={n} exceeds budget of {budget} cells")
    outputs = sorted(support, key=lambda s: (len(s), s))
    col = {y: j for j, y in enumerate(outputs)}
    matrix = np.zeros((2 ** n, len(outputs)))
    for i, law in enumerate(rows):
        for y, p in law.items():
            matrix[i, col[y]] += p
    return TransitionTable(n, tuple(outputs), matrix)


def _as_vector(input_dist, tbl: TransitionTable) -> np.ndarray:
    size = 2 ** tbl.n
    if isinstance(input_dist, dict):
        p = np.zeros(size)
        for x, v in input_dist.items():
            if len(x) != tbl.n:
                raise ValueError(f"input {x!r} does not have length {tbl.n}")
            p[int(x, 2) if x else 0] += v
    else:
        p = np.asarray(input_dist, dtype=float).reshape(-1)
        if p.size != size:
            raise ValueError(f"input distribution has {p.size} entries, table has {size} rows")
    if abs(p.sum() - 1.0) > 1e-9 or (p < 0).any():
        raise ValueError("input distribution must be a probability vector")
    return p


def uniform_input(n: int) -> np.ndarray:
    return np.full(2 ** n, 2.0 ** -n)


def _xlogy_ratio(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise ``sum_y P log2(P / q)`` with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * (np.log2(P) - np.log2(np.where(q > 0, q, 1.0))), 0.0)
    return terms.sum(axis=1)


def mutual_information(input_dist, tbl: TransitionTable) -> float:
    """``I(X;Y)`` in bits."""
    p = _as_vector(input_dist, tbl)
    q = p @ tbl.matrix
    d = _xlogy_ratio(tbl.matrix, q)
    return float(max(p @ d, 0.0))


@dataclass
class CapacityEstimate:
    n: int
    info_rate_bits_per_symbol: float
    optimizer_input_dist: np.ndarray
    iterations: int
    convergence_gap: float
    converged: bool
    mi_history: list = field(default_factory=list, repr=False)

    @property
    def mutual_information(self) -> float:
        return self.info_rate_bits_per_symbol * self.n

    def input_table(self) -> dict[str, float]:
        return {x: float(p) for x, p in zip(_input_strings(self.n), self.optimizer_input_dist) if p > 0}


def maximize_mi(tbl: TransitionTable, tol: float = 1e-7, max_iter: int = 100_000) -> CapacityEstimate:
    """Blahut-Arimoto from the uniform input.

    Stops once ``max_x D(P(.|x) || q) - I`` (an upper bound on the distance to
    the optimum) falls below ``tol``.
    """
    W = tbl.matrix
    p = uniform_input(tbl.n)
    history = []
    gap = math.inf
    best_p, best_mi = p, -math.inf
    it = 0
    for it in range(1, max_iter + 1):
        q = p @ W
        d = _xlogy_ratio(W, q)
        mi = float(p @ d)
        history.append(mi)
        if mi > best_mi:
            best_p, best_mi = p, mi
        gap = float(d.max() - mi)
        if gap < tol:
            break
        # exponents are shifted by their max for stability
        w = p * np.exp2(d - d.max())
        p = w / w.sum()
    converged = gap < tol
    rate = best_mi / tbl.n if tbl.n else 0.0
    return CapacityEstimate(tbl.n, float(min(max(rate, 0.0), 1.0)), best_p, it, gap, converged, history)


@dataclass(frozen=True)
class RcTrcComparison:
    n: int
    i_rc: float
    i_trc: float
    gap: float
    trim_pair_entropy: float
    trim_pair_count: int


def trim_pair_law(dist: RepeatDistribution, n: int, input_dist=None) -> dict[tuple, float]:
    """Joint law of the input indices whose copies become the first and last
    surviving one of the output (``(0, 0)`` when no one survives)."""
    p_in = uniform_input(n) if input_dist is None else np.asarray(input_dist, dtype=float)
    p0 = float(dist.pmf[0])
    keep = 1.0 - p0
    law: dict[tuple, float] = {}
    for xi, px in enumerate(p_in):
        if px == 0:
            continue
        x = [int(c) for c in format(xi, f"0{n}b")] if n else []
        ones = [i + 1 for i, b in enumerate(x) if b]
        k = len(ones)
        law[(0, 0)] = law.get((0, 0), 0.0) + px * p0 ** k
        for a, i in enumerate(ones):
            for c in range(a, k):
                j = ones[c]
                if a == c:
                    pr = keep * p0 ** (k - 1)
                else:
                    pr = keep * keep * p0 ** (a + (k - 1 - c))
                if pr > 0:
                    law[(i, j)] = law.get((i, j), 0.0) + px * pr
    return {kv: v for kv, v in law.items() if v > 0}


def entropy_bits(probs) -> float:
    p = np.asarray(list(probs), dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def compare_rc_trc(dist: RepeatDistribution, n: int, input_dist=None,
                   budget: int = DEFAULT_CELL_BUDGET) -> RcTrcComparison:
    """``I(X;Y)`` under the repeat channel and its trimming version for one input law."""
    rc = build_transition_table(ChannelModel(REPEAT, repeat_dist=dist), n, budget)
    trc = build_transition_table(ChannelModel(TRIMMING_REPEAT, repeat_dist=dist), n, budget)
    p = uniform_input(n) if input_dist is None else _as_vector(input_dist, rc)
    i_rc = mutual_information(p, rc)
    i_trc = mutual_information(p, trc)
    pairs = trim_pair_law(dist, n, p)
    return RcTrcComparison(n, i_rc, i_trc, abs(i_rc - i_trc), entropy_bits(pairs.values()), len(pairs))


@dataclass(frozen=True)
class BalanceReport:
    window_len: int
    window_means: np.ndarray  # expected ones fraction per window start
    min_fraction: float
    max_fraction: float
    degenerate: bool


def balance_report(est, zeta: float, n: Optional[int] = None) -> BalanceReport:
    """Expected ones fraction of every length-``floor(zeta*n)`` window under an input law.

    ``est`` is a :class:`CapacityEstimate` or a raw probability vector over ``{0,1}^n``.
    """
    if isinstance(est, CapacityEstimate):
        p, n = est.optimizer_input_dist, est.n
    else:
        p = np.asarray(est, dtype=float)
        n = int(round(math.log2(p.size))) if n is None else n
    L = int(math.floor(zeta * n))
    if L < 1:
        raise ValueError("window length is zero")
    xs = np.array([[int(c) for c in format(i, f"0{n}b")] for i in range(2 ** n)], dtype=float)
    marginals = p @ xs  # P(X_k = 1)
    csum = np.concatenate([[0.0], np.cumsum(marginals)])
    means = (csum[L:] - csum[:-L]) / L
    lo, hi = float(means.min()), float(means.max())
    return BalanceReport(L, means, lo, hi, degenerate=bool(lo <= 1e-12 or hi >= 1 - 1e-12))
