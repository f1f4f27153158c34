import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repeatcode.channels import (
    DOBRUSHIN, REPEAT, TRIMMING_DOBRUSHIN, TRIMMING_REPEAT, ChannelError, ChannelModel,
    RepeatDistribution, apply, apply_traced, likelihood, likelihood_dobrushin, likelihood_rc,
    likelihood_tdc, likelihood_trc, make_deletion, make_deletion_flip, make_dobrushin, make_poisson,
    make_repeat, point_mass, poisson_distribution, repeat_as_dobrushin, uniform_trim,
)

from oracles import all_strings, dobrushin_law, rc_law, tdc_law, trc_law

PMFS = [
    {0: 0.3, 1: 0.7},
    {0: 0.2, 1: 0.5, 2: 0.3},
    {0: 0.5, 2: 0.5},
    {1: 0.6, 2: 0.4},
]


def _dist(pmf):
    return RepeatDistribution.from_mapping(pmf)


def test_make_deletion():
    ident = make_deletion(0.0)
    assert ident.repeat_dist.as_dict() == {1: 1.0}
    half = make_deletion(0.5).repeat_dist
    assert half.mean_mu == pytest.approx(0.5)
    assert half.var_sigma2 == pytest.approx(0.25)
    with pytest.raises(ChannelError):
        make_deletion(1.0)


def test_poisson_truncation():
    d = poisson_distribution(1.0, 1e-9)
    # direct series for the untruncated pmf, then the same renormalization
    B = d.truncation_bound_B
    series = [math.exp(-1.0) / math.factorial(r) for r in range(B + 1)]
    assert d.pmf[0] == pytest.approx(series[0] / sum(series), abs=1e-12)
    assert d.pmf[0] == pytest.approx(0.367879, abs=1e-6)
    assert d.tail_mass_dropped < 1e-9
    tail_before = 1 - sum(math.exp(-1.0) / math.factorial(r) for r in range(B))
    assert tail_before >= 1e-9  # B is the smallest cut meeting the tolerance
    assert make_poisson(0.5).repeat_dist.mean_mu == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ChannelError):
        make_poisson(-1)


def test_repeat_distribution_invariants():
    d = RepeatDistribution(np.array([2.0, 6.0, 0.0, 0.0]))
    assert d.pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert d.truncation_bound_B == 1
    assert d.mean_mu == pytest.approx(0.75)
    with pytest.raises(ChannelError):
        RepeatDistribution(np.array([-0.1, 1.1]))


def test_apply_examples():
    assert apply(make_deletion(0.0), "0110", 123) == "0110"
    assert apply(make_repeat({2: 1.0}), "01", 0) == "0011"
    assert apply(make_deletion(0.3), "", 5) == ""


def test_apply_length_concentration():
    # Bin(10000, 1/2) leaves [4600, 5400] with probability about 1e-15
    n = [len(apply(make_deletion(0.5), "1" * 10000, s)) for s in range(20)]
    assert all(4600 <= v <= 5400 for v in n)


def test_apply_is_deterministic_per_seed():
    ch = make_poisson(1.3)
    x = "0110100111"
    assert apply(ch, x, 42) == apply(ch, x, 42)
    y, origin = apply_traced(ch, x, 7)
    assert np.all(np.diff(origin) >= 0)
    assert all(y[k] == int(x[origin[k]]) for k in range(len(y)))


@pytest.mark.parametrize("pmf", PMFS)
def test_likelihood_rc_matches_enumeration(pmf):
    dist = _dist(pmf)
    for n in range(0, 5):
        for x in all_strings(n):
            law = rc_law(pmf, x)
            assert sum(likelihood_rc(dist, x, y) for y in law) == pytest.approx(1.0, abs=1e-9)
            for y, p in law.items():
                assert likelihood_rc(dist, x, y) == pytest.approx(p, abs=1e-12)
                if p > 1e-300:
                    assert math.exp(likelihood_rc(dist, x, y, log=True)) == pytest.approx(p, rel=1e-9)


def test_likelihood_rc_examples():
    d = make_deletion(0.3).repeat_dist
    assert likelihood_rc(d, "1", "") == pytest.approx(0.3)
    assert likelihood_rc(d, "11", "1") == pytest.approx(0.42)
    pmf = {0: 0.2, 1: 0.5, 2: 0.3}
    assert likelihood_rc(_dist(pmf), "10", "100") == pytest.approx(rc_law(pmf, "10")["100"], abs=1e-15)
    assert likelihood_rc(d, "11", "0") == 0.0


@pytest.mark.parametrize("pmf", PMFS)
def test_likelihood_trc_matches_enumeration(pmf):
    dist = _dist(pmf)
    for n in range(0, 5):
        for x in all_strings(n):
            law = trc_law(pmf, x)
            assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
            for y, p in law.items():
                assert likelihood_trc(dist, x, y) == pytest.approx(p, abs=1e-12)
                if p > 1e-300:
                    assert math.exp(likelihood_trc(dist, x, y, log=True)) == pytest.approx(p, rel=1e-9)


def test_likelihood_trc_is_padded_rc_sum():
    pmf = {0: 0.2, 1: 0.5, 2: 0.3}
    dist = _dist(pmf)
    for x in all_strings(3):
        for y in ("1", "101", "11", "1001"):
            total = sum(likelihood_rc(dist, x, "0" * a + y + "0" * b)
                        for a in range(7) for b in range(7))
            assert likelihood_trc(dist, x, y) == pytest.approx(total, abs=1e-12)


def test_likelihood_trc_examples():
    d = make_deletion(0.4).repeat_dist
    assert likelihood_trc(d, "1", "1") == pytest.approx(0.6)
    assert likelihood_trc(d, "1", "") == pytest.approx(0.4)
    h = make_deletion(0.5).repeat_dist
    assert likelihood_trc(h, "01", "1") == pytest.approx(0.5)
    assert likelihood_trc(h, "01", "") == pytest.approx(0.5)
    assert likelihood_trc(h, "01", "01") == 0.0  # not a trimmed string
    law = trc_law({0: 0.5, 2: 0.5}, "010")
    dist = _dist({0: 0.5, 2: 0.5})
    assert {y: likelihood_trc(dist, "010", y) for y in law} == pytest.approx(law, abs=1e-15)


def test_dobrushin_examples():
    ident = make_dobrushin({"0": 1.0}, {"1": 1.0})
    for x in all_strings(4):
        assert likelihood_dobrushin(ident.d0, ident.d1, x, x) == pytest.approx(1.0)
    flip = make_dobrushin({"0": 1.0}, {"1": 0.9, "0": 0.1})
    assert likelihood_dobrushin(flip.d0, flip.d1, "1", "0") == pytest.approx(0.1)


def test_dobrushin_encoding_of_repeat_agrees():
    dist = make_deletion(0.3).repeat_dist
    model = repeat_as_dobrushin(dist)
    for n in range(0, 7):
        for x in all_strings(n):
            for y, p in rc_law(dist.as_dict(), x).items():
                assert likelihood_dobrushin(model.d0, model.d1, x, y) == pytest.approx(
                    likelihood_rc(dist, x, y), abs=1e-12)
    pmf = {0: 0.2, 1: 0.5, 2: 0.3}
    model = repeat_as_dobrushin(_dist(pmf))
    for x in all_strings(3):
        for y, p in rc_law(pmf, x).items():
            assert likelihood_dobrushin(model.d0, model.d1, x, y) == pytest.approx(p, abs=1e-12)


def test_dobrushin_matches_enumeration():
    ch = make_deletion_flip(0.2, 0.1)
    d0, d1 = ch.d0.as_dict(), ch.d1.as_dict()
    for x in all_strings(4):
        for y, p in dobrushin_law(d0, d1, x).items():
            assert likelihood_dobrushin(ch.d0, ch.d1, x, y) == pytest.approx(p, abs=1e-12)


def test_tdc_matches_enumeration():
    ch = make_deletion_flip(0.2, 0.1)
    tl, tr = uniform_trim(2), RepeatDistribution(np.array([0.5, 0.5]))
    model = ch.trimming(tl, tr)
    for x in all_strings(4):
        law = tdc_law(ch.d0.as_dict(), ch.d1.as_dict(), tl.as_dict(), tr.as_dict(), x)
        assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
        for y, p in law.items():
            assert likelihood_tdc(model, x, y) == pytest.approx(p, abs=1e-12)


def test_tdc_without_trimming_is_dobrushin():
    ch = make_deletion_flip(0.1, 0.05)
    model = ch.trimming(point_mass(0), point_mass(0))
    for x in all_strings(3):
        for y in all_strings(2) + all_strings(3):
            assert likelihood_tdc(model, x, y) == pytest.approx(
                likelihood_dobrushin(ch.d0, ch.d1, x, y), abs=1e-15)


def test_dispatch_and_kinds():
    dist = make_deletion(0.2).repeat_dist
    rc = ChannelModel(REPEAT, repeat_dist=dist)
    assert likelihood(rc, "10", "1") == pytest.approx(likelihood_rc(dist, "10", "1"))
    assert likelihood(rc.trimming(), "10", "1") == pytest.approx(likelihood_trc(dist, "10", "1"))
    assert rc.trimming().kind == TRIMMING_REPEAT
    dc = make_deletion_flip(0.1, 0.05)
    assert dc.kind == DOBRUSHIN
    assert dc.trimming(point_mass(0), point_mass(1)).kind == TRIMMING_DOBRUSHIN
    with pytest.raises(ChannelError):
        ChannelModel(REPEAT)
    with pytest.raises(ChannelError):
        dc.trimming()


def test_biased_condition():
    ch = make_deletion_flip(0.1, 0.05)
    assert ch.is_biased
    assert ch.ones_fraction_f == pytest.approx(0.05)
    skewed = make_dobrushin({"0": 1.0}, {"11": 0.5, "": 0.5})
    assert not make_dobrushin({"0": 0.5, "1": 0.5}, {"1": 1.0}).is_biased
    assert skewed.is_biased  # equal expected lengths, ones-fractions on either side of 1/2


@pytest.mark.parametrize("model", [
    make_deletion(0.25), make_poisson(1.5), make_deletion_flip(0.1, 0.05),
    make_deletion_flip(0.1, 0.05).trimming(uniform_trim(2), point_mass(1)),
])
def test_json_round_trip(model):
    back = ChannelModel.from_json(model.to_json())
    assert back.kind == model.kind
    for x in ("0110", "1"):
        for y in ("1", "11", "0110"):
            assert likelihood(back, x, y) == pytest.approx(likelihood(model, x, y), abs=1e-15)


def test_empirical_frequencies_match_likelihood():
    pmf = {0: 0.2, 1: 0.5, 2: 0.3}
    model = make_repeat(pmf)
    x = "1001"
    trials = 100_000
    rng = np.random.default_rng(2024)
    # vectorized sampling through the same per-bit law as apply
    reps = rng.choice(3, size=(trials, len(x)), p=[0.2, 0.5, 0.3])
    counts: dict = {}
    for row in map(tuple, reps):
        counts[row] = counts.get(row, 0) + 1
    freq: dict = {}
    for row, c in counts.items():
        y = "".join(b * r for b, r in zip(x, row))
        freq[y] = freq.get(y, 0) + c
    for y, c in freq.items():
        p = likelihood_rc(model.repeat_dist, x, y)
        se = math.sqrt(p * (1 - p) / trials)
        assert abs(c / trials - p) <= 3 * se + 1e-12
    # and apply itself reproduces the same law on a smaller run
    hits = sum(str(apply(model, x, s)) == "1001" for s in range(4000))
    p = likelihood_rc(model.repeat_dist, x, "1001")
    assert abs(hits / 4000 - p) <= 4 * math.sqrt(p * (1 - p) / 4000)


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="01", max_size=5), st.floats(0.05, 0.95))
def test_rc_rows_sum_to_one(x, d):
    dist = make_deletion(d).repeat_dist
    total = sum(likelihood_rc(dist, x, y) for n in range(len(x) + 1) for y in all_strings(n))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_poisson_likelihoods_match_enumeration():
    dist = poisson_distribution(0.8, 1e-6)
    pmf = dist.as_dict()
    for x in all_strings(3):
        for y, p in rc_law(pmf, x).items():
            assert likelihood_rc(dist, x, y) == pytest.approx(p, abs=1e-12)
        for y, p in trc_law(pmf, x).items():
            assert likelihood_trc(dist, x, y) == pytest.approx(p, abs=1e-12)
