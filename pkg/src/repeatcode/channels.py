"""Repeat, trimming-repeat and (trimming) Dobrushin channels.

Samplers plus exact transition probabilities computed by forward dynamic
programming over (input position, output position).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy import stats

from .core import BitLike, BitString, as_bits, trim_bounds

REPEAT = "repeat"
TRIMMING_REPEAT = "trimming_repeat"
DOBRUSHIN = "dobrushin"
TRIMMING_DOBRUSHIN = "trimming_dobrushin"
KINDS = (REPEAT, TRIMMING_REPEAT, DOBRUSHIN, TRIMMING_DOBRUSHIN)

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


class ChannelError(ValueError):
    pass


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class RepeatDistribution:
    """Finite-support distribution of the repetition count.

    ``pmf[r]`` is the probability of ``r`` copies, ``r = 0 .. B``. Moments are
    recomputed from the table.
    """

    pmf: np.ndarray
    tail_mass_dropped: float = 0.0
    source: Optional[dict] = None

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=np.float64).reshape(-1)
        if p.size == 0 or (p < 0).any():
            raise ChannelError("pmf must be a non-empty table of non-negative probabilities")
        total = p.sum()
        if not np.isfinite(total) or total <= 0:
            raise ChannelError("pmf has no mass")
        # drop trailing zeros so that B is the true support bound
        nz = np.flatnonzero(p)
        p = p[: nz[-1] + 1] / total
        p.flags.writeable = False
        object.__setattr__(self, "pmf", p)

    @classmethod
    def from_mapping(cls, table: Mapping[int, float]) -> "RepeatDistribution":
        table = {int(k): float(v) for k, v in table.items()}
        if any(k < 0 for k in table):
            raise ChannelError("repeat counts must be non-negative")
        p = np.zeros(max(table) + 1)
        for k, v in table.items():
            p[k] = v
        return cls(p)

    @property
    def truncation_bound_B(self) -> int:
        return int(self.pmf.size - 1)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pmf)

    @property
    def mean_mu(self) -> float:
        r = np.arange(self.pmf.size)
        return float((r * self.pmf).sum())

    @property
    def var_sigma2(self) -> float:
        r = np.arange(self.pmf.size)
        return float((r * r * self.pmf).sum() - self.mean_mu ** 2)

    def as_dict(self) -> dict[int, float]:
        return {int(r): float(p) for r, p in enumerate(self.pmf) if p > 0}

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.pmf.size, size=size, p=self.pmf)

    def to_json(self) -> dict:
        if self.source is not None:
            return dict(self.source)
        return {str(k): v for k, v in self.as_dict().items()}


def poisson_distribution(lam: float, tail_tol: float = 1e-9) -> RepeatDistribution:
    """Poisson(lam) cut at the smallest B with ``P(R > B) < tail_tol``, renormalized."""
    if not lam > 0:
        raise ChannelError(f"Poisson rate must be positive, got {lam}")
    if not 0 < tail_tol < 1:
        raise ChannelError("tail_tol must be in (0, 1)")
    B = 0
    while stats.poisson.sf(B, lam) >= tail_tol:
        B += 1
    pmf = stats.poisson.pmf(np.arange(B + 1), lam)
    dropped = float(stats.poisson.sf(B, lam))
    return RepeatDistribution(
        pmf, tail_mass_dropped=dropped,
        source={"type": "poisson", "lambda": lam, "tail_tol": tail_tol},
    )


@dataclass(frozen=True)
class OutputDistribution:
    """Law of the output fragment produced by a single input bit."""

    fragments: tuple  # tuple of (bits ndarray, prob)

    @classmethod
    def from_mapping(cls, table: Mapping[str, float]) -> "OutputDistribution":
        total = sum(table.values())
        if total <= 0 or any(v < 0 for v in table.values()):
            raise ChannelError("fragment table must have non-negative mass")
        frags = []
        for s, p in sorted(table.items(), key=lambda kv: (len(kv[0]), kv[0])):
            if p > 0:
                frags.append((as_bits(s).copy(), float(p) / total))
        return cls(tuple(frags))

    @property
    def expected_length(self) -> float:
        return sum(p * f.size for f, p in self.fragments)

    @property
    def expected_weight(self) -> float:
        return sum(p * int(f.sum()) for f, p in self.fragments)

    @property
    def max_length(self) -> int:
        return max(f.size for f, _ in self.fragments)

    def as_dict(self) -> dict[str, float]:
        return {str(BitString(f)): p for f, p in self.fragments}


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    repeat_dist: Optional[RepeatDistribution] = None
    d0: Optional[OutputDistribution] = None
    d1: Optional[OutputDistribution] = None
    trim_left: Optional[RepeatDistribution] = None
    trim_right: Optional[RepeatDistribution] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ChannelError(f"unknown channel kind {self.kind!r}")
        if self.kind in (REPEAT, TRIMMING_REPEAT):
            if self.repeat_dist is None:
                raise ChannelError(f"{self.kind} model needs a repeat distribution")
        else:
            if self.d0 is None or self.d1 is None:
                raise ChannelError(f"{self.kind} model needs d0 and d1")
            if self.kind == TRIMMING_DOBRUSHIN and (self.trim_left is None or self.trim_right is None):
                raise ChannelError("trimming Dobrushin model needs trim_left and trim_right")

    @property
    def is_repeat(self) -> bool:
        return self.kind in (REPEAT, TRIMMING_REPEAT)

    @property
    def is_trimming(self) -> bool:
        return self.kind in (TRIMMING_REPEAT, TRIMMING_DOBRUSHIN)

    @property
    def mean_output_length(self) -> float:
        """Expected output length per input bit (mu for repeat models)."""
        if self.is_repeat:
            return self.repeat_dist.mean_mu
        return 0.5 * (self.d0.expected_length + self.d1.expected_length)

    @property
    def ones_fraction_f(self) -> float:
        """Expected fraction of ones in the output of a long run of zeros."""
        if self.is_repeat:
            return 0.0
        return self.d0.expected_weight / self.d0.expected_length

    @property
    def is_biased(self) -> bool:
        if self.is_repeat:
            return True
        l0, l1 = self.d0.expected_length, self.d1.expected_length
        return (
            abs(l0 - l1) <= 1e-9
            and self.d0.expected_weight < 0.5 * l0
            and self.d1.expected_weight > 0.5 * l1
        )

    def base(self) -> "ChannelModel":
        """The non-trimming channel underneath."""
        if self.kind == TRIMMING_REPEAT:
            return ChannelModel(REPEAT, repeat_dist=self.repeat_dist, name=self.name)
        if self.kind == TRIMMING_DOBRUSHIN:
            return ChannelModel(DOBRUSHIN, d0=self.d0, d1=self.d1, name=self.name)
        return self

    def trimming(self, trim_left=None, trim_right=None) -> "ChannelModel":
        """The trimming version of this channel."""
        if self.is_repeat:
            return ChannelModel(TRIMMING_REPEAT, repeat_dist=self.repeat_dist, name=self.name)
        tl = trim_left if trim_left is not None else self.trim_left
        tr = trim_right if trim_right is not None else self.trim_right
        if tl is None or tr is None:
            raise ChannelError("trimming Dobrushin needs trim distributions")
        return ChannelModel(TRIMMING_DOBRUSHIN, d0=self.d0, d1=self.d1,
                            trim_left=tl, trim_right=tr, name=self.name)

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.is_repeat:
            body = ",".join(f"{k}:{v:.6g}" for k, v in self.repeat_dist.as_dict().items())
            return f"{self.kind}({body})"
        return f"{self.kind}(f={self.ones_fraction_f:.4g})"

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.name:
            doc["name"] = self.name
        if self.is_repeat:
            doc["pmf"] = self.repeat_dist.to_json()
        else:
            doc["d0"] = self.d0.as_dict()
            doc["d1"] = self.d1.as_dict()
            if self.kind == TRIMMING_DOBRUSHIN:
                doc["trim_left"] = self.trim_left.to_json()
                doc["trim_right"] = self.trim_right.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: Union[dict, str]) -> "ChannelModel":
        if isinstance(doc, str):
            doc = json.loads(doc)
        kind = doc["kind"]
        name = doc.get("name", "")
        if kind in (REPEAT, TRIMMING_REPEAT):
            return cls(kind, repeat_dist=_dist_from_json(doc["pmf"]), name=name)
        d0 = OutputDistribution.from_mapping(doc["d0"])
        d1 = OutputDistribution.from_mapping(doc["d1"])
        if kind == TRIMMING_DOBRUSHIN:
            return cls(kind, d0=d0, d1=d1, trim_left=_dist_from_json(doc["trim_left"]),
                       trim_right=_dist_from_json(doc["trim_right"]), name=name)
        return cls(kind, d0=d0, d1=d1, name=name)


def _dist_from_json(doc: dict) -> RepeatDistribution:
    if doc.get("type") == "poisson":
        return poisson_distribution(float(doc["lambda"]), float(doc.get("tail_tol", 1e-9)))
    if doc.get("type") == "deletion":
        d = float(doc["d"])
        return RepeatDistribution(np.array([d, 1 - d]), source={"type": "deletion", "d": d})
    return RepeatDistribution.from_mapping({int(k): float(v) for k, v in doc.items()})


# -- constructors -------------------------------------------------------------

def make_deletion(d: float) -> ChannelModel:
    if not 0 <= d < 1:
        raise ChannelError(f"deletion probability must be in [0, 1), got {d}")
    dist = RepeatDistribution(np.array([d, 1.0 - d]), source={"type": "deletion", "d": d})
    return ChannelModel(REPEAT, repeat_dist=dist, name=f"deletion(d={d:g})")


def make_poisson(lam: float, tail_tol: float = 1e-9) -> ChannelModel:
    dist = poisson_distribution(lam, tail_tol)
    return ChannelModel(REPEAT, repeat_dist=dist, name=f"poisson(lambda={lam:g})")


def make_repeat(pmf: Union[Mapping[int, float], np.ndarray, RepeatDistribution]) -> ChannelModel:
    if isinstance(pmf, RepeatDistribution):
        dist = pmf
    elif isinstance(pmf, Mapping):
        dist = RepeatDistribution.from_mapping(pmf)
    else:
        dist = RepeatDistribution(np.asarray(pmf, dtype=float))
    return ChannelModel(REPEAT, repeat_dist=dist)


def make_dobrushin(d0: Mapping[str, float], d1: Mapping[str, float], name: str = "") -> ChannelModel:
    return ChannelModel(DOBRUSHIN, d0=OutputDistribution.from_mapping(d0),
                        d1=OutputDistribution.from_mapping(d1), name=name)


def make_deletion_flip(d: float, flip: float) -> ChannelModel:
    """Each bit is deleted with probability ``d``, otherwise flipped with probability ``flip``."""
    if not (0 <= d < 1 and 0 <= flip < 0.5):
        raise ChannelError("need 0 <= d < 1 and 0 <= flip < 1/2")
    keep = 1.0 - d
    d0 = {"": d, "0": keep * (1 - flip), "1": keep * flip}
    d1 = {"": d, "1": keep * (1 - flip), "0": keep * flip}
    return make_dobrushin(d0, d1, name=f"deletion_flip(d={d:g},flip={flip:g})")


def repeat_as_dobrushin(dist: RepeatDistribution) -> ChannelModel:
    """Dobrushin model whose fragments are the runs ``0^r`` / ``1^r``."""
    d0 = {"0" * r: float(p) for r, p in enumerate(dist.pmf) if p > 0}
    d1 = {"1" * r: float(p) for r, p in enumerate(dist.pmf) if p > 0}
    return make_dobrushin(d0, d1)


def point_mass(k: int = 0) -> RepeatDistribution:
    p = np.zeros(k + 1)
    p[k] = 1.0
    return RepeatDistribution(p)


def uniform_trim(upper: int) -> RepeatDistribution:
    """Uniform law on ``{0, ..., upper}``."""
    return RepeatDistribution(np.full(upper + 1, 1.0 / (upper + 1)))


# -- sampling -----------------------------------------------------------------

def apply_traced(model: ChannelModel, x: BitLike, seed: SeedLike = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample the channel and return ``(y, origin)``.

    ``origin[k]`` is the input index that produced output bit ``k``. Used for
    ground-truth alignment in instrumented runs.
    """
    rng = make_rng(seed)
    bits = as_bits(x)
    n = bits.size
    if model.is_repeat:
        reps = model.repeat_dist.sample(rng, n)
        y = np.repeat(bits, reps)
        origin = np.repeat(np.arange(n), reps)
        if model.kind == TRIMMING_REPEAT:
            lo, hi = trim_bounds(y)
            y, origin = y[lo:hi], origin[lo:hi]
        return y, origin

    pieces, origins = [], []
    idx0 = rng.choice(len(model.d0.fragments), size=n, p=[p for _, p in model.d0.fragments])
    idx1 = rng.choice(len(model.d1.fragments), size=n, p=[p for _, p in model.d1.fragments])
    for i in range(n):
        frag = model.d1.fragments[idx1[i]][0] if bits[i] else model.d0.fragments[idx0[i]][0]
        if frag.size:
            pieces.append(frag)
            origins.append(np.full(frag.size, i))
    y = np.concatenate(pieces).astype(np.uint8) if pieces else np.zeros(0, np.uint8)
    origin = np.concatenate(origins) if origins else np.zeros(0, np.int64)
    if model.kind == TRIMMING_DOBRUSHIN:
        tl = int(model.trim_left.sample(rng, 1)[0])
        tr = int(model.trim_right.sample(rng, 1)[0])
        stop = y.size - tr
        if stop < tl:
            y, origin = y[:0], origin[:0]
        else:
            y, origin = y[tl:stop], origin[tl:stop]
    return y, origin


def apply(model: ChannelModel, x: BitLike, seed: SeedLike = None) -> BitString:
    """Pass ``x`` through the channel; deterministic given ``seed``."""
    y, _ = apply_traced(model, x, seed)
    return BitString(y)


# -- exact likelihoods ----------------------------------------------------------

def _run_lengths(y: np.ndarray) -> np.ndarray:
    """``runs[b, j]``: length of the run of ``b`` ending just before position ``j`` of ``y``."""
    runs = np.zeros((2, y.size + 1), dtype=np.int64)
    for j in range(1, y.size + 1):
        b = y[j - 1]
        runs[b, j] = runs[b, j - 1] + 1
    return runs


def _rc_step(T: np.ndarray, b: int, pmf: np.ndarray, runs: np.ndarray, first: int = 0) -> np.ndarray:
    """One input bit of the repeat-channel forward recursion over output positions."""
    new = np.zeros_like(T)
    ok = runs[b]
    for r in range(first, pmf.size):
        p = pmf[r]
        if p == 0:
            continue
        if r == 0:
            new += p * T
        elif r >= T.size:
            break
        else:
            mask = ok[r:] >= r
            new[r:] += p * T[: T.size - r] * mask
    return new


def likelihood_rc(dist: RepeatDistribution, x: BitLike, y: BitLike, log: bool = False) -> float:
    """``P(RC_D x = y)``.

    With ``log=True`` the forward pass is rescaled at every input bit and the
    natural-log probability is returned (``-inf`` when impossible).
    """
    xb, yb = as_bits(x), as_bits(y)
    pmf = dist.pmf
    if yb.size > xb.size * (pmf.size - 1):
        return -math.inf if log else 0.0
    runs = _run_lengths(yb)
    T = np.zeros(yb.size + 1)
    T[0] = 1.0
    logscale = 0.0
    for b in xb:
        T = _rc_step(T, int(b), pmf, runs)
        if log:
            s = T.max()
            if s == 0:
                return -math.inf
            T /= s
            logscale += math.log(s)
    if log:
        return math.log(T[-1]) + logscale if T[-1] > 0 else -math.inf
    return float(T[-1])


def likelihood_trc(dist: RepeatDistribution, x: BitLike, y: BitLike, log: bool = False) -> float:
    """``P(TRIM(RC_D x) = y)``.

    Zero for ``y`` that does not start and end with a one (such strings are
    never produced by trimming). Input ones before the first emitted one and
    after the last must be deleted; input zeros there are free.
    """
    xb, yb = as_bits(x), as_bits(y)
    pmf = dist.pmf
    p0 = pmf[0]
    ones_before = np.concatenate([[0], np.cumsum(xb, dtype=np.int64)])  # ones in x[:i]
    total_ones = int(ones_before[-1])
    if yb.size == 0:
        if total_ones == 0:
            return 0.0 if log else 1.0
        if p0 == 0:
            return -math.inf if log else 0.0
        return total_ones * math.log(p0) if log else float(p0 ** total_ones)
    if yb[0] != 1 or yb[-1] != 1 or yb.size > xb.size * (pmf.size - 1):
        return -math.inf if log else 0.0

    def prefix_weight(k):  # P(all ones among the given count are deleted)
        if k == 0:
            return 1.0
        return p0 ** k

    runs = _run_lengths(yb)
    m = yb.size
    T = np.zeros(m + 1)
    logscale = 0.0
    acc = 0.0
    acc_log = -math.inf
    for i, b in enumerate(xb):
        b = int(b)
        new = _rc_step(T, b, pmf, runs)
        if b == 1:
            # phase entry: x_i emits the first r >= 1 ones of y
            k = int(ones_before[i])
            if p0 > 0 or k == 0:
                rs = [r for r in range(1, min(pmf.size, m + 1)) if pmf[r] > 0 and runs[1, r] >= r]
                if rs:
                    if log:
                        base = k * math.log(p0) if k else 0.0
                        logs = np.array([math.log(pmf[r]) + base - logscale for r in rs])
                        top = logs.max()
                        if top > 0:  # keep the scaled table below 1
                            new *= math.exp(-top)
                            logscale += top
                            logs -= top
                        new[rs] += np.exp(logs)
                    else:
                        new[rs] += pmf[rs] * prefix_weight(k)
            done = new[m]
            if done > 0:
                suffix = prefix_weight(total_ones - int(ones_before[i + 1]))
                if log:
                    if suffix > 0:
                        acc_log = np.logaddexp(acc_log, math.log(done) + math.log(suffix) + logscale)
                else:
                    acc += done * suffix
        new[m] = 0.0
        T = new
        if log:
            s = T.max()
            if s > 0:
                T /= s
                logscale += math.log(s)
    if log:
        return float(acc_log)
    return float(acc)


def _fragment_masks(frags, target: np.ndarray, wild_lo: int = 0, wild_hi: Optional[int] = None):
    """``masks[f][j]`` is True when fragment ``f`` can end at position ``j`` of the target.

    Target positions outside ``[wild_lo, wild_hi)`` are wildcards.
    """
    E = target.size
    if wild_hi is None:
        wild_hi = E
    masks = []
    for frag, _ in frags:
        L = frag.size
        mask = np.zeros(E + 1, dtype=bool)
        for j in range(L, E + 1):
            seg = slice(j - L, j)
            pos = np.arange(j - L, j)
            care = (pos >= wild_lo) & (pos < wild_hi)
            mask[j] = bool((target[seg][care] == frag[care]).all())
        masks.append(mask)
    return masks


def _dobrushin_forward(d0: OutputDistribution, d1: OutputDistribution, x: np.ndarray,
                       target: np.ndarray, wild_lo: int = 0, wild_hi: Optional[int] = None) -> np.ndarray:
    masks = {0: _fragment_masks(d0.fragments, target, wild_lo, wild_hi),
             1: _fragment_masks(d1.fragments, target, wild_lo, wild_hi)}
    E = target.size
    T = np.zeros(E + 1)
    T[0] = 1.0
    for b in x:
        b = int(b)
        dist = d1 if b else d0
        new = np.zeros_like(T)
        for (frag, p), mask in zip(dist.fragments, masks[b]):
            L = frag.size
            if L == 0:
                new += p * T
            elif L <= E:
                new[L:] += p * T[: E + 1 - L] * mask[L:]
        T = new
    return T


def likelihood_dobrushin(d0: OutputDistribution, d1: OutputDistribution, x: BitLike, y: BitLike) -> float:
    """``P(DC x = y)`` for the Dobrushin channel with per-bit laws ``d0``/``d1``."""
    xb, yb = as_bits(x), as_bits(y)
    return float(_dobrushin_forward(d0, d1, xb, yb)[-1])


def _dobrushin_length_pmf(d0: OutputDistribution, d1: OutputDistribution, x: np.ndarray) -> np.ndarray:
    maxlen = max(d0.max_length, d1.max_length) * x.size
    T = np.zeros(maxlen + 1)
    T[0] = 1.0
    for b in x:
        dist = d1 if b else d0
        new = np.zeros_like(T)
        for frag, p in dist.fragments:
            L = frag.size
            new[L:] += p * T[: T.size - L]
        T = new
    return T


def likelihood_tdc(model: ChannelModel, x: BitLike, y: BitLike) -> float:
    """``P(TRIM_{T_l,T_r}(DC x) = y)``: ``t_l`` bits cut from the left, ``t_r`` from the right."""
    if model.kind not in (TRIMMING_DOBRUSHIN, DOBRUSHIN):
        raise ChannelError("likelihood_tdc needs a Dobrushin model")
    xb, yb = as_bits(x), as_bits(y)
    if model.kind == DOBRUSHIN:
        return likelihood_dobrushin(model.d0, model.d1, xb, yb)
    tl_pmf, tr_pmf = model.trim_left.pmf, model.trim_right.pmf
    if yb.size == 0:
        lengths = np.cumsum(_dobrushin_length_pmf(model.d0, model.d1, xb))  # P(|z| <= k)
        total = 0.0
        for tl, pl in enumerate(tl_pmf):
            for tr, pr in enumerate(tr_pmf):
                if pl * pr > 0:
                    k = min(tl + tr, lengths.size - 1)
                    total += pl * pr * lengths[k]
        return float(total)
    max_tr = tr_pmf.size - 1
    total = 0.0
    for tl, pl in enumerate(tl_pmf):
        if pl == 0:
            continue
        target = np.concatenate([np.zeros(tl, np.uint8), yb, np.zeros(max_tr, np.uint8)])
        T = _dobrushin_forward(model.d0, model.d1, xb, target, tl, tl + yb.size)
        for tr, pr in enumerate(tr_pmf):
            if pr > 0:
                total += pl * pr * T[tl + yb.size + tr]
    return float(total)


def likelihood(model: ChannelModel, x: BitLike, y: BitLike) -> float:
    """Transition probability ``P(y | x)`` under any supported model."""
    if model.kind == REPEAT:
        return likelihood_rc(model.repeat_dist, x, y)
    if model.kind == TRIMMING_REPEAT:
        return likelihood_trc(model.repeat_dist, x, y)
    return likelihood_tdc(model, x, y)
