import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmflab import model, moments as mo, squaresets as sq
from rmflab.errors import BudgetExceeded, InvalidArgument, Unsupported
from rmflab.model import ModelSpec
from rmflab.sieve import squarefree_count

SEED = 20261018


def brute_distribution(n):
    """S_n over every sign vector, theta by trial division."""
    primes = [p for p in range(2, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]
    sf = []
    for l in range(1, n + 1):
        m, fs, p, ok = l, [], 2, True
        while p * p <= m:
            if m % p == 0:
                m //= p
                if m % p == 0:
                    ok = False
                    break
                fs.append(p)
            p += 1
        if ok:
            if m > 1:
                fs.append(m)
            sf.append(fs)
    out = Counter()
    for eps in itertools.product((1, -1), repeat=len(primes)):
        x = dict(zip(primes, eps))
        out[sum(math.prod(x[p] for p in fs) for fs in sf)] += 1
    return dict(out), len(primes)


@pytest.mark.parametrize("n", [1, 2, 3, 6, 10, 15, 22])
def test_distribution_matches_brute_force(tables, n):
    counts, m = brute_distribution(n)
    d = mo.exact_distribution(tables, n)
    assert d.counts == counts and d.log2_total == m


def test_distribution_thread_invariance(tables):
    a = mo._exact_distribution(tables, 150, 25, 1)
    b = mo._exact_distribution(tables, 150, 25, 8)
    assert a.counts == b.counts


def test_moment_examples(tables):
    assert mo.exact_moment_enumeration(tables, 3, 1) == 3
    assert mo.exact_moment_enumeration(tables, 3, 2) == 21
    for r in range(4):
        assert mo.exact_moment_enumeration(tables, 1, r) == 1


def test_tuple_oracle_examples(tables):
    assert mo.tuple_count_oracle(tables, 3, 1) == 3
    assert mo.tuple_count_oracle(tables, 3, 2) == 21
    assert mo.tuple_count_oracle(tables, 1, 1) == 1


def test_tuple_oracle_equals_enumeration(tables):
    for n in range(1, 9):
        for r in range(1, 4):
            assert mo.exact_moment_enumeration(tables, n, r) == mo.tuple_count_oracle(tables, n, r)


def test_odd_moments_equal_tuple_counts(tables):
    # theta_1 = 1 makes these nonzero; the invariant is equality with the count
    for n in range(1, 21):
        for r in range(3):
            q = 2 * r + 1
            assert mo.exact_raw_moment(tables, n, q) == mo.tuple_count(tables, n, q)
    assert mo.exact_raw_moment(tables, 3, 1) == 1


def test_second_moment_formula(tables, rad):
    for n in range(1, 41):
        assert mo.exact_moment_enumeration(tables, n, 1) == mo.second_moment_formula(rad, tables, n) == squarefree_count(tables, n)
    assert mo.second_moment_formula(rad, tables, 10) == 7
    v = Fraction(5, 2)
    spec = ModelSpec.symmetric_finite(model.parse_support("-2:1/4,-1:1/4,1:1/4,2:1/4"))
    assert mo.second_moment_formula(spec, tables, 6) == 1 + 3 * v + v * v


def test_moment_badset_inequality(tables):
    for n in range(1, 41):
        d = sq.badset_counts(tables, n)
        for r in (1, 2, 3):
            assert mo.exact_moment_enumeration(tables, n, r) >= math.factorial(2 * r) * d.B(r)


@given(st.floats(min_value=-10, max_value=10, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_charfn_n3_closed_form(tables, t):
    c, s = mo.exact_charfn(tables, 3, t)
    assert c == pytest.approx((math.cos(3 * t) + 3 * math.cos(t)) / 4, abs=1e-12)
    # S_3 takes values 3, 1, 1, -1, so the sine part does not vanish
    assert s == pytest.approx((math.sin(3 * t) + math.sin(t)) / 4, abs=1e-12)


def test_charfn_examples(tables):
    assert mo.exact_charfn(tables, 3, math.pi)[0] == pytest.approx(-1, abs=1e-12)
    assert mo.exact_charfn(tables, 30, 0.0) == (1.0, 0.0)


def test_mgf(tables):
    assert mo.exact_mgf(tables, 3, 1.0) == pytest.approx((math.e**3 + 2 * math.e + 1 / math.e) / 4, rel=1e-14)
    assert mo.exact_mgf(tables, 20, 0.0) == 1.0
    # S_3 - 1 is symmetric
    assert mo.exact_mgf(tables, 3, 0.7) * math.exp(-0.7) == pytest.approx(mo.exact_mgf(tables, 3, -0.7) * math.exp(0.7))
    # large lambda stays finite through log-sum-exp
    assert math.isfinite(mo.exact_log_mgf(tables, 30, 50.0))


@given(st.integers(1, 22), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_mgf_against_brute(tables, n, lam):
    counts, m = brute_distribution(n)
    direct = math.fsum(c * math.exp(lam * v) for v, c in counts.items()) / 2**m
    assert mo.exact_mgf(tables, n, lam) == pytest.approx(direct, rel=1e-12)


def test_enumeration_errors(tables):
    with pytest.raises(BudgetExceeded):
        mo.exact_moment_enumeration(tables, 1000, 1)
    spec = ModelSpec.symmetric_finite(model.parse_support("-2:1/2,2:1/2"))
    with pytest.raises(Unsupported):
        mo.exact_moment_enumeration(tables, 10, 1, spec)


def test_report_invariants():
    with pytest.raises(InvalidArgument):
        mo.MomentReport(3, "2r=2", Fraction(3), 0.1, mo.ENUMERATION)
    with pytest.raises(InvalidArgument):
        mo.MomentReport(3, "2r=2", 3.0, float("nan"), mo.MONTE_CARLO, 10, 1)
    with pytest.raises(InvalidArgument):
        mo.MomentReport(3, "2r=2", 3.0, 0.1, mo.MONTE_CARLO, 0, 1)


def test_mc_moments_calibration(tables, rad):
    reps = mo.mc_moments(rad, tables, [30], [1, 2], 10**5, SEED)
    for rep, r in zip(reps, (1, 2)):
        exact = float(mo.exact_moment_enumeration(tables, 30, r))
        assert abs(rep.value - exact) < 4 * rep.standard_error


def test_mc_moments_two_paths(tables, rad):
    (rep,) = mo.mc_moments(rad, tables, [30], [1], 2, SEED)
    assert math.isfinite(rep.standard_error)
    with pytest.raises(InvalidArgument):
        mo.mc_moments(rad, tables, [30], [1], 1, SEED)


def test_mc_thread_invariance(tables, rad):
    a = mo.mc_moments(rad, tables, [30, 1000], [1, 2], 6000, SEED, threads=1)
    b = mo.mc_moments(rad, tables, [30, 1000], [1, 2], 6000, SEED, threads=8)
    assert a == b


def test_mc_tail(tables, rad):
    reps = mo.mc_tail(rad, tables, 30, [-31, 0, 10**3], 10**4, SEED, z=2.576)
    assert reps[0].value == 1 and reps[2].value == 0
    exact = float(mo.exact_distribution(tables, 30).prob_at_least(0))
    assert reps[1].lower <= exact <= reps[1].upper
    with pytest.raises(InvalidArgument):
        mo.mc_tail(rad, tables, 30, [0], 99, SEED)


def test_wilson_interval():
    lo, hi = mo.wilson_interval(0, 100)
    assert lo == 0 and 0 < hi < 0.05
    lo, hi = mo.wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_mc_charfn(tables, rad):
    reps = mo.mc_charfn_decay(rad, tables, [10, 25], 0.0, "sqrt-n", 500, SEED)
    assert [r.value for r in reps] == [1.0, 1.0]
    reps = mo.mc_charfn_decay(rad, tables, [10, 25], 1.0, "sqrt-n-over-log-n", 2 * 10**4, SEED)
    for rep in reps:
        an = math.sqrt(rep.n / math.log(rep.n))
        exact = mo.exact_charfn(tables, rep.n, 1.0 / an)[0]
        assert abs(rep.value - exact) < 4 * rep.standard_error
    with pytest.raises(InvalidArgument):
        mo.mc_charfn_decay(rad, tables, [1, 10], 1.0, "sqrt-n-over-log-n", 100, SEED)
    with pytest.raises(InvalidArgument):
        mo.mc_charfn_decay(rad, tables, [10], 1.0, lambda n: 0.0, 100, SEED)
    with pytest.raises(InvalidArgument):
        mo.normalizer("nope")


def test_formula_normalizer():
    f = mo.formula_normalizer("sqrt(n) / log(log(n))")
    assert f(100) == pytest.approx(10 / math.log(math.log(100)))
    with pytest.raises(InvalidArgument):
        mo.formula_normalizer("__import__('os')")
    with pytest.raises(InvalidArgument):
        mo.formula_normalizer("n +")


def test_normality_calibration():
    x = np.random.default_rng(1).normal(0, 3, 50_000)
    rep = mo.normality_diagnostics(x, 0, 9.0)
    assert abs(rep.excess_kurtosis) < 4 * rep.kurtosis_se
    assert rep.ks_distance < 0.01
    with pytest.raises(InvalidArgument):
        mo.normality_diagnostics(np.ones(2000), 0, 1.0)
    with pytest.raises(InvalidArgument):
        mo.normality_diagnostics(x[:999], 0, 9.0)


def test_normality_n40_exact_vs_mc(tables, rad):
    S = model.simulate_partial_sums(rad, tables, [40], 10**5, SEED)[:, 0]
    rep = mo.normality_diagnostics(S, 40, float(squarefree_count(tables, 40)))
    exact = float(mo.exact_kurtosis(tables, 40))
    assert abs(rep.kurtosis_ratio - exact) < 4 * rep.kurtosis_se


def test_jackknife_se_scale():
    x = np.random.default_rng(3).normal(size=4000)
    _, se = mo.jackknife_kurtosis(x)
    # asymptotic SE of the kurtosis of a normal sample is sqrt(24 / N)
    assert 0.5 < se / math.sqrt(24 / 4000) < 2


def test_growth(tables, rad):
    rep = mo.path_growth_report(rad, tables, 10**4, 1.0, 50, SEED)
    assert set(rep.quantiles.values()) == {1.0}
    assert rep.argmax_counts == {1: 50}
    a = mo.path_growth_report(rad, tables, 10**4, 0.1, 10**3, SEED)
    b = mo.path_growth_report(rad, tables, 10**4, 0.1, 10**3, SEED)
    assert a == b and math.isfinite(a.quantiles[0.99])
    assert a.grid[0] == 1 and a.grid[-1] == 10**4
    with pytest.raises(InvalidArgument):
        mo.path_growth_report(rad, tables, 100, 0.0, 10, SEED)
