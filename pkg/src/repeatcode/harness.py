"""Experiment driver: Monte Carlo runs, scaling sweeps and small-n checks.

Seed schedule. ``SeedSequence(master_seed).spawn(2)`` gives a search stream
and a trial stream; trial ``i`` uses ``trial_stream.spawn(trial_count)[i]``,
which first draws the message and then drives the channel. Results therefore
depend only on (config, master_seed), never on execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channels import ChannelModel, apply_traced, make_deletion, make_deletion_flip, uniform_trim
from .concat_codec import (
    REPEAT_MODE, TAXONOMY_WEIGHTS, ConcatParams, build_params, decode, encode, outer_symbols,
)
from .core import BitString
from .info_rate import (
    build_transition_table, compare_rc_trc, entropy_bits, maximize_mi, mutual_information, uniform_input,
)
from .inner_code import InnerCode, sample_admissible_words, search_inner_code
from .outer_code import OuterCodeParams

CSV_SCHEMA = "repeatcode-trials/1"
CSV_FIELDS = ("trial", "success", "type1", "type2", "type3", "type4", "weighted", "segments", "realized_rate")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    channel: dict
    inner: dict
    outer: dict
    eta: float = 0.5
    mode: str = REPEAT_MODE
    nu: float = 1.0
    kappa: float = 0.0
    trim_upper: Optional[int] = None
    trial_count: int = 100
    master_seed: int = 0
    instrumented: bool = True
    failure_bound: Optional[float] = None
    output_dir: Optional[str] = None
    code_path: Optional[str] = None
    scaling: Optional[dict] = None
    lemma_checks: dict = field(default_factory=dict)
    notes: str = ""

    @classmethod
    def from_json(cls, doc) -> "ExperimentConfig":
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("channel", "inner", "outer"):
            if key not in doc:
                raise ConfigError(f"config is missing {key!r}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_json(path.read_text())
        if cfg.code_path and not Path(cfg.code_path).is_absolute():
            cfg.code_path = str(path.parent / cfg.code_path)
        return cfg

    def to_json(self) -> dict:
        return asdict(self)

    def channel_model(self) -> ChannelModel:
        try:
            return ChannelModel.from_json(self.channel)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad channel spec: {exc}") from exc

    def outer_params(self) -> OuterCodeParams:
        o = self.outer
        return OuterCodeParams(int(o["q"]), int(o["n_rs"]), int(o["k_rs"]), int(o.get("irreducible_poly", 0)))

    def seeds(self) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
        search_ss, trial_ss = np.random.SeedSequence(self.master_seed).spawn(2)
        return search_ss, trial_ss


def _decoding_channel(cfg: ExperimentConfig, channel: ChannelModel, block_len: int) -> ChannelModel:
    if cfg.mode == REPEAT_MODE:
        return channel
    # trims absorb the boundary slack of the density window, at most one window per side
    upper = cfg.trim_upper
    if upper is None:
        upper = max(1, int(round(cfg.nu * cfg.eta * block_len)))
    return channel.trimming(uniform_trim(upper), uniform_trim(upper))


def build_code(cfg: ExperimentConfig, outer: Optional[OuterCodeParams] = None,
               block_len: Optional[int] = None) -> ConcatParams:
    """Construct (or load) the inner code and validate the full parameter bundle."""
    channel = cfg.channel_model()
    outer = outer or cfg.outer_params()
    spec = cfg.inner
    if cfg.code_path and outer == cfg.outer_params() and block_len is None:
        inner = InnerCode.from_json(Path(cfg.code_path).read_text())
    else:
        m = int(spec.get("m", outer.symbol_bits))
        if m != outer.symbol_bits:
            raise ConfigError(f"inner m = {m} but outer symbols have {outer.symbol_bits} bits")
        L = int(block_len or spec["block_len"])
        max_run = spec.get("max_zero_run")
        if max_run is None and cfg.mode == REPEAT_MODE:
            mu = channel.mean_output_length
            max_run = max(1, int(math.floor(mu / 2 * cfg.eta * L)))
        # in Dobrushin mode codewords are balanced at the density-window scale
        zeta = float(spec.get("zeta", 0.5 if cfg.mode == REPEAT_MODE else cfg.nu * cfg.eta))
        search_seed = spec.get("seed")
        if search_seed is None:
            search_seed = int(cfg.seeds()[0].generate_state(1)[0])
        inner = search_inner_code(
            _decoding_channel(cfg, channel, L), m, L,
            zeta=zeta, gamma=float(spec.get("gamma", 0.25)),
            num_candidates=int(spec.get("candidates", 4)), mc_trials=int(spec.get("trials", 200)),
            seed=int(search_seed), max_zero_run=max_run,
        )
    return build_params(inner, outer, cfg.eta, cfg.mode, cfg.nu, cfg.kappa)


# -- trials ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrialReport:
    trial: int
    success: bool
    taxonomy: Optional[tuple]
    segments: int
    realized_rate: float
    wall_time: float = field(default=0.0, compare=False)

    def csv_row(self) -> list:
        t = self.taxonomy
        tax = [str(v) for v in t] + [str(3 * t[0] + t[1] + 3 * t[2] + 2 * t[3])] if t else [""] * 5
        return [str(self.trial), str(int(self.success)), *tax, str(self.segments), f"{self.realized_rate:.10g}"]


def run_trial(params: ConcatParams, channel: ChannelModel, index: int, ss: np.random.SeedSequence,
              instrumented: bool = True) -> TrialReport:
    t0 = time.perf_counter()
    rng = np.random.default_rng(ss)
    msg = rng.integers(0, 2, params.message_bits, dtype=np.uint8)
    x = encode(params, msg)
    y, origin = apply_traced(channel, x, rng)
    if instrumented:
        out = decode(params, y, origin, outer_symbols(params, msg))
    else:
        out = decode(params, y)
    ok = out.success and np.array_equal(out.message.bits, msg)
    tax = out.taxonomy.counts if out.taxonomy is not None else None
    return TrialReport(index, bool(ok), tax, len(out.spans), params.realized_rate,
                       time.perf_counter() - t0)


@dataclass
class SimulationReport:
    trials: int
    failures: int
    failure_rate: float
    stderr: float
    realized_rate: float
    taxonomy_histograms: dict
    taxonomy_means: dict
    failure_bound: Optional[float]
    within_bound: Optional[bool]
    params: dict
    wall_time: float = 0.0
    reports: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("reports")
        return d


def _binomial(failures: int, trials: int) -> tuple[float, float]:
    p = failures / trials if trials else 0.0
    return p, math.sqrt(p * (1 - p) / trials) if trials else 0.0


def aggregate(reports: Sequence[TrialReport], params: ConcatParams, bound: Optional[float] = None,
              wall_time: float = 0.0) -> SimulationReport:
    reports = sorted(reports, key=lambda r: r.trial)
    n = len(reports)
    failures = sum(not r.success for r in reports)
    p, se = _binomial(failures, n)
    names = ("type1", "type2", "type3", "type4", "weighted")
    hist: dict = {k: {} for k in names}
    means: dict = {}
    tax = [r.taxonomy for r in reports if r.taxonomy is not None]
    if tax:
        arr = np.array([list(t) + [3 * t[0] + t[1] + 3 * t[2] + 2 * t[3]] for t in tax])
        for j, k in enumerate(names):
            vals, counts = np.unique(arr[:, j], return_counts=True)
            hist[k] = {str(int(v)): int(c) for v, c in zip(vals, counts)}
            means[k] = float(arr[:, j].mean())
    within = None if bound is None else bool(p <= bound)
    return SimulationReport(n, failures, p, se, params.realized_rate, hist, means, bound, within,
                            params.summary(), wall_time, list(reports))


def trials_csv(reports: Sequence[TrialReport]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in sorted(reports, key=lambda r: r.trial):
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_trials_csv(path) -> list[TrialReport]:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# schema:"):
        raise ConfigError("trials file has no schema line")
    if lines[0].split(":", 1)[1].strip() != CSV_SCHEMA:
        raise ConfigError(f"unsupported trials schema {lines[0]!r}")
    out = []
    for row in csv.DictReader(lines[1:]):
        tax = None if row["type1"] == "" else tuple(int(row[k]) for k in ("type1", "type2", "type3", "type4"))
        out.append(TrialReport(int(row["trial"]), row["success"] == "1", tax,
                               int(row["segments"]), float(row["realized_rate"])))
    return out


def run_simulation(cfg: ExperimentConfig, out_dir=None, params: Optional[ConcatParams] = None) -> SimulationReport:
    """Run ``cfg.trial_count`` independent end-to-end trials.

    Construction errors surface before any trial runs. With ``out_dir`` set,
    writes ``trials.csv``, ``summary.json`` and ``code.json`` there.
    """
    if cfg.trial_count < 1:
        raise ConfigError("trial_count must be positive")
    channel = cfg.channel_model()
    params = params or build_code(cfg)
    t0 = time.perf_counter()
    _, trial_ss = cfg.seeds()
    reports = [run_trial(params, channel, i, s, cfg.instrumented)
               for i, s in enumerate(trial_ss.spawn(cfg.trial_count))]
    report = aggregate(reports, params, cfg.failure_bound, time.perf_counter() - t0)
    out_dir = out_dir or cfg.output_dir
    if out_dir:
        write_outputs(Path(out_dir), cfg, params, report)
    return report


def write_outputs(out_dir: Path, cfg: ExperimentConfig, params: ConcatParams, report: SimulationReport) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trials.csv").write_text(trials_csv(report.reports))
    summary = report.to_json()
    summary["config"] = cfg.to_json()
    summary["version"] = __version__
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out_dir / "code.json").write_text(json.dumps(params.to_json()) + "\n")


# -- fault injection ------------------------------------------------------------

def taxonomy_vectors(budget: int) -> list[tuple[int, int, int, int]]:
    """All count vectors ``(t1, t2, t3, t4)`` whose weighted sum is at most ``budget``."""
    w1, w2, w3, w4 = TAXONOMY_WEIGHTS
    out = []
    for t1 in range(budget // w1 + 1):
        for t3 in range((budget - w1 * t1) // w3 + 1):
            for t4 in range((budget - w1 * t1 - w3 * t3) // w4 + 1):
                for t2 in range(budget - w1 * t1 - w3 * t3 - w4 * t4 + 1):
                    out.append((t1, t2, t3, t4))
    return out


def _fusable_buffers(params: ConcatParams, symbols: Sequence[int]) -> list[int]:
    """Buffers whose removal leaves no zero run long enough to pass for a buffer."""
    cb = params.inner.codebook
    out = []
    for j in range(params.k_prime - 1):
        left, right = cb[symbols[j]], cb[symbols[j + 1]]
        tail = len(left) - (np.flatnonzero(left)[-1] + 1)
        head = np.flatnonzero(right)[0]
        if tail + head < params.buffer_threshold:
            out.append(j)
    return out


def inject_faults(params: ConcatParams, message, counts: Sequence[int], rng: np.random.Generator,
                  max_tries: int = 1000) -> tuple[np.ndarray, np.ndarray, dict]:
    """Noiseless transmission with constructed error events (repeat mode).

    ``counts = (t1, t2, t3, t4)``: drop ``t1`` buffers between words whose
    edge zeros cannot form a buffer on their own; drop the whole output of
    ``t2`` words; split ``t3`` words with an inserted run of
    ``buffer_threshold`` zeros; replace ``t4`` words with another codeword.
    Events touch pairwise non-adjacent words. Returns ``(y, origin, sites)``
    with ``origin`` in transmitted coordinates.
    """
    if params.mode != REPEAT_MODE:
        raise ConfigError("fault injection is defined for repeat mode")
    t1, t2, t3, t4 = (int(c) for c in counts)
    L, b, k = params.block_len, params.buffer_len_b, params.k_prime
    symbols = outer_symbols(params, message)
    x = encode(params, message).bits
    fusable = _fusable_buffers(params, symbols)
    for _ in range(max_tries):
        used: set = set()
        sites: dict = {"type1": [], "type2": [], "type3": [], "type4": []}

        def free(words):
            return all(w not in used and w - 1 not in used and w + 1 not in used for w in words)

        ok = True
        for j in rng.permutation(fusable)[: max(t1 * 4, t1)]:
            if len(sites["type1"]) == t1:
                break
            if free((j, j + 1)):
                sites["type1"].append(int(j))
                used.update((j, j + 1))
        ok &= len(sites["type1"]) == t1
        for key, n in (("type2", t2), ("type3", t3), ("type4", t4)):
            for w in rng.permutation(k):
                if len(sites[key]) == n:
                    break
                if free((w,)):
                    sites[key].append(int(w))
                    used.add(int(w))
            ok &= len(sites[key]) == n
        if ok:
            break
    else:
        raise ConfigError(f"could not place events {tuple(counts)} on {k} words")

    pieces = []
    for j in range(k):
        start = j * (L + b)
        wb, wo = x[start : start + L], np.arange(start, start + L)
        if j in sites["type2"]:
            wb, wo = wb[:0], wo[:0]
        elif j in sites["type3"]:
            ones = np.flatnonzero(wb)
            cut = int(rng.integers(ones[0] + 1, ones[-1] + 1))
            pad = params.buffer_threshold
            wb = np.concatenate([wb[:cut], np.zeros(pad, np.uint8), wb[cut:]])
            wo = np.concatenate([wo[:cut], np.full(pad, wo[cut - 1]), wo[cut:]])
        elif j in sites["type4"]:
            other = int(rng.integers(params.inner.size - 1))
            other += other >= symbols[j]
            wb = params.inner.codebook[other]
        pieces.append((wb, wo))
        if j < k - 1 and j not in sites["type1"]:
            pieces.append((x[start + L : start + L + b], np.arange(start + L, start + L + b)))
    y = np.concatenate([p[0] for p in pieces]).astype(np.uint8)
    origin = np.concatenate([p[1] for p in pieces]).astype(np.int64)
    return y, origin, sites


# -- scaling --------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingRow:
    q: int
    n_rs: int
    k_rs: int
    msg_bits_m: int
    block_len: int
    total_len_n: int
    trials: int
    failures: int
    failure_rate: float
    stderr: float
    inner_failure_est: float


def run_scaling_study(cfg: ExperimentConfig, sizes: Optional[Sequence] = None, out_dir=None) -> list[ScalingRow]:
    """Failure rate per outer-code size.

    ``sizes`` entries are ``(q, n_rs, k_rs, block_len)``; defaults come from
    ``cfg.scaling["sizes"]``. The inner code is searched afresh per size
    since its message length follows the outer symbol width.
    """
    if sizes is None:
        sizes = (cfg.scaling or {}).get("sizes")
    if not sizes or len(sizes) < 3:
        raise ConfigError("a scaling study needs at least three sizes")
    channel = cfg.channel_model()
    rows = []
    base_ss = np.random.SeedSequence(cfg.master_seed)
    for (q, n_rs, k_rs, block_len), size_ss in zip(sizes, base_ss.spawn(len(sizes))):
        outer = OuterCodeParams(int(q), int(n_rs), int(k_rs))
        sub = ExperimentConfig(**{**cfg.to_json(), "outer": outer.to_json(),
                                  "inner": {**cfg.inner, "m": outer.symbol_bits, "block_len": int(block_len)},
                                  "code_path": None, "scaling": None,
                                  "master_seed": int(size_ss.generate_state(1)[0])})
        params = build_code(sub)
        rep = run_simulation(sub, params=params)
        rows.append(ScalingRow(outer.q, outer.n_rs, outer.k_rs, outer.symbol_bits, int(block_len),
                               params.total_len_n, rep.trials, rep.failures, rep.failure_rate,
                               rep.stderr, params.inner.est_failure_prob))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scaling.csv").write_text(scaling_csv(rows))
    return rows


def scaling_csv(rows: Sequence[ScalingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(ScalingRow.__dataclass_fields__)
    w.writerow(names)
    for r in rows:
        w.writerow([getattr(r, k) for k in names])
    return buf.getvalue()


def nonincreasing_within(rates: Sequence[float], stderrs: Sequence[float], sigmas: float = 2.0) -> bool:
    """Each rate is at most its predecessor plus ``sigmas`` combined standard errors."""
    for i in range(1, len(rates)):
        slack = sigmas * math.hypot(stderrs[i - 1], stderrs[i])
        if rates[i] > rates[i - 1] + slack:
            return False
    return True


# -- small-n checks -------------------------------------------------------------

@dataclass
class LemmaReport:
    trimming_gap: list = field(default_factory=list)
    trimming_gap_ok: bool = True
    dobrushin_trim: list = field(default_factory=list)
    dobrushin_trim_ok: bool = True
    density: list = field(default_factory=list)
    density_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.trimming_gap_ok and self.dobrushin_trim_ok and self.density_ok

    def to_json(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def check_trimming_gap(d: float = 0.5, ns: Sequence[int] = range(1, 9)) -> tuple[list, bool]:
    """Per-bit ``|I_RC - I_TRC|`` under uniform input against the trim-pair entropy bound."""
    dist = make_deletion(d).repeat_dist
    rows = []
    for n in ns:
        c = compare_rc_trc(dist, n)
        rows.append({"n": n, "i_rc": c.i_rc, "i_trc": c.i_trc, "gap": c.gap, "gap_per_bit": c.gap / n,
                     "trim_pair_entropy": c.trim_pair_entropy, "bound_ok": c.gap <= 2 * c.trim_pair_entropy})
    per_bit = [r["gap_per_bit"] for r in rows if r["n"] >= 2]
    decreasing = all(b < a for a, b in zip(per_bit, per_bit[1:]))
    return rows, bool(decreasing and all(r["bound_ok"] for r in rows))


def check_dobrushin_trim(model: ChannelModel, ns: Sequence[int] = range(1, 6), nu: float = 1.0,
                         eta: float = 0.5, trim_upper: Optional[int] = None) -> tuple[list, bool]:
    """Capacity lost to trimming at small ``n``.

    Trims are uniform on ``{0..T}`` with ``T = round(nu * eta * n)`` unless
    ``trim_upper`` is given. The loss is bounded by the ``2T`` removed bits
    plus ``2 log2(T + 1)`` bits for the two trim lengths.
    """
    base = model.base()
    rows = []
    ok = True
    for n in ns:
        T = int(round(nu * eta * n)) if trim_upper is None else int(trim_upper)
        tdc = base.trimming(uniform_trim(T), uniform_trim(T))
        dc_tbl = build_transition_table(base, n)
        tdc_tbl = build_transition_table(tdc, n)
        cap_dc = maximize_mi(dc_tbl).mutual_information
        cap_tdc = maximize_mi(tdc_tbl).mutual_information
        slack = 2 * math.log2(T + 1)
        lower = cap_dc - 2 * T - slack
        passed = cap_tdc >= lower - 1e-9 and cap_tdc <= cap_dc + 1e-6
        ok &= passed
        rows.append({"n": n, "trim_upper": T, "cap_dc": cap_dc, "cap_tdc": cap_tdc,
                     "lower_bound": lower, "ok": bool(passed)})
    return rows, bool(ok)


def density_misclassification(model: ChannelModel, m: int, eta: float, nu: float, kappa: float,
                              zeta: Optional[float] = None, gamma: float = 0.25, trials: int = 500,
                              seed=0) -> dict:
    """Fraction of windows lying wholly inside one codeword's or one buffer's
    output whose ones density lands on the wrong side of ``f + kappa``.

    Each trial sends ``c 0^b c'`` with fresh balanced codewords of length ``m``.
    """
    b = int(round(eta * m))
    w = int(round(nu * eta * m))
    if w < 1 or b < 1:
        raise ConfigError("window and buffer lengths must be positive")
    zeta = nu * eta if zeta is None else zeta
    thr = model.ones_fraction_f + kappa
    rng = np.random.default_rng(seed)
    words = sample_admissible_words(rng, m, zeta, gamma, 2 * trials)
    wrong = [0, 0]
    total = [0, 0]
    labels = np.concatenate([np.zeros(m, np.int8), np.ones(b, np.int8), np.zeros(m, np.int8)])
    for t in range(trials):
        x = np.concatenate([words[2 * t], np.zeros(b, np.uint8), words[2 * t + 1]])
        y, origin = apply_traced(model, x, rng)
        if y.size < w:
            continue
        lab = labels[origin]
        part = np.where(origin < m, 0, np.where(origin < m + b, 1, 2))
        csum = np.concatenate([[0], np.cumsum(y, dtype=np.int64)])
        ones = csum[w:] - csum[:-w]
        first, last = part[: y.size - w + 1], part[w - 1 :]
        pure = first == last
        kind = lab[: y.size - w + 1]
        low = ones < thr * w
        for k in (0, 1):
            sel = pure & (kind == k)
            total[k] += int(sel.sum())
            wrong[k] += int((sel & (low if k == 0 else ~low)).sum())
    cw_rate = wrong[0] / total[0] if total[0] else 0.0
    buf_rate = wrong[1] / total[1] if total[1] else 0.0
    # the two classes are weighted equally; codeword windows vastly outnumber buffer ones
    rate = 0.5 * (cw_rate + buf_rate)
    return {"m": m, "window_len": w, "buffer_len": b, "threshold": thr,
            "codeword_windows": total[0], "codeword_errors": wrong[0],
            "buffer_windows": total[1], "buffer_errors": wrong[1], "codeword_rate": cw_rate,
            "buffer_rate": buf_rate, "misclassification": rate}


def check_density(model: ChannelModel, ms: Sequence[int] = (16, 32, 64), eta: float = 0.5, nu: float = 1.0,
                  kappa: float = 0.2, gamma: float = 0.25, trials: int = 500, seed=0) -> tuple[list, bool]:
    """Misclassification per ``m``; passes when it never increases and ends lower (or is zero throughout)."""
    f = model.ones_fraction_f
    if not (model.is_biased and 0 < kappa < 0.5 - f):
        raise ConfigError(f"need a biased model and kappa in (0, {0.5 - f:.4g})")
    streams = np.random.SeedSequence(seed).spawn(len(ms))
    rows = [density_misclassification(model, m, eta, nu, kappa, gamma=gamma, trials=trials, seed=s)
            for m, s in zip(ms, streams)]
    rates = [r["misclassification"] for r in rows]
    monotone = all(b <= a for a, b in zip(rates, rates[1:]))
    ok = monotone and (rates[-1] < rates[0] or rates[0] == 0.0)
    return rows, bool(ok)


def run_lemma_checks(cfg: Optional[ExperimentConfig] = None, **overrides) -> LemmaReport:
    """Checks (a) trimming gap, (b) Dobrushin trimming loss, (c) window density.

    Options come from ``cfg.lemma_checks`` (overridable by keyword):
    ``rc_d``, ``rc_ns``, ``dobrushin`` (channel JSON), ``tdc_ns``,
    ``density_ms``, ``density_trials``, ``nu``, ``eta``, ``kappa``, ``gamma``, ``seed``.
    """
    opts = dict(cfg.lemma_checks) if cfg is not None else {}
    opts.update(overrides)
    seed = opts.get("seed", cfg.master_seed if cfg is not None else 0)
    nu = float(opts.get("nu", cfg.nu if cfg is not None else 1.0))
    eta = float(opts.get("eta", cfg.eta if cfg is not None else 0.5))
    kappa = float(opts.get("kappa", cfg.kappa if cfg is not None and cfg.kappa else 0.2))
    dob = opts.get("dobrushin")
    if dob is None:
        model = make_deletion_flip(0.1, 0.05)
    else:
        model = ChannelModel.from_json(dob)
    report = LemmaReport()
    if opts.get("skip_a") is not True:
        report.trimming_gap, report.trimming_gap_ok = check_trimming_gap(
            float(opts.get("rc_d", 0.5)), opts.get("rc_ns", range(1, 9)))
    if opts.get("skip_b") is not True:
        report.dobrushin_trim, report.dobrushin_trim_ok = check_dobrushin_trim(
            model, opts.get("tdc_ns", range(1, 6)), nu, eta)
    if opts.get("skip_c") is not True:
        report.density, report.density_ok = check_density(
            model.base(), opts.get("density_ms", (16, 32, 64)), eta, nu, kappa,
            float(opts.get("gamma", 0.25)), int(opts.get("density_trials", 500)), seed)
    return report


def info_rate_rows(model: ChannelModel, ns: Sequence[int]) -> list[dict]:
    """Rows for the info-rate table: exact RC/TRC comparison and the optimizer's entropy."""
    rows = []
    for n in ns:
        if model.is_repeat:
            c = compare_rc_trc(model.repeat_dist, n)
            trc = build_transition_table(model.trimming(), n)
            est = maximize_mi(trc)
            i_rc, i_trc, gap = c.i_rc, c.i_trc, c.gap
        else:
            tbl = build_transition_table(model, n)
            est = maximize_mi(tbl)
            i_rc = i_trc = mutual_information(uniform_input(n), tbl)
            gap = 0.0
        rows.append({"n": n, "channel": model.describe(), "i_rc": i_rc, "i_trc": i_trc, "gap": gap,
                     "optimizer_entropy": entropy_bits(est.optimizer_input_dist),
                     "info_rate": est.info_rate_bits_per_symbol})
    return rows


def as_bitstring(text: str) -> BitString:
    return BitString(text.strip())
