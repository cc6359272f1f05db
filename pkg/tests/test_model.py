import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmflab import model
from rmflab.errors import BudgetExceeded, InvalidArgument, InvalidSpec, OutOfRange
from rmflab.model import ModelSpec


def brute_theta(values: dict, l: int) -> float:
    # independent route: trial division
    out, m, p = 1.0, l, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0.0
            out *= values[p]
        p += 1
    if m > 1:
        out *= values[m]
    return out


def test_spec_validation():
    assert ModelSpec.rademacher().M == 1
    s = ModelSpec.symmetric_finite([(-2, Fraction(1, 4)), (-1, Fraction(1, 4)), (1, Fraction(1, 4)), (2, Fraction(1, 4))])
    assert s.M == 2 and s.c0 == 1
    assert s.second_moment(3) == Fraction(5, 2)
    with pytest.raises(InvalidSpec):
        ModelSpec.symmetric_finite([(1, Fraction(1))])  # not symmetric
    with pytest.raises(InvalidSpec):
        ModelSpec.symmetric_finite([(-1, Fraction(1, 3)), (1, Fraction(1, 3))])  # mass 2/3
    with pytest.raises(InvalidSpec):
        ModelSpec.symmetric_finite([(0, Fraction(1))])
    with pytest.raises(InvalidSpec):
        ModelSpec("rademacher", overrides={3: ((-1, Fraction(1, 2)), (1, Fraction(1, 2)))})


def test_parse_support():
    sup = model.parse_support("-2:1/4, -1:1/4, 1:1/4, 2:1/4")
    assert ModelSpec.symmetric_finite(sup).M == 2
    with pytest.raises(InvalidSpec):
        model.parse_support("1-1/2")


def test_model_config_file(tmp_path):
    f = tmp_path / "m.conf"
    f.write_text("# model\nfamily = symmetric-finite\nsupport = -1:1/2,1:1/2\noverride.3 = -3:1/2,3:1/2\nseed = 9\n")
    spec, seed = model.load_model_config(f)
    assert seed == 9
    assert spec.support_for(3) == ((Fraction(-3), Fraction(1, 2)), (Fraction(3), Fraction(1, 2)))
    assert spec.M == 3


def test_rademacher_values_are_signs(tables, rad):
    p = model.sample_path(rad, tables, 1, 0, 10**4)
    assert set(np.unique(p.values)) <= {-1.0, 1.0}


def test_paths_are_pure_functions_of_seed_and_id(tables, rad):
    a = model.sample_path(rad, tables, 42, 7, 1000)
    b = model.sample_path(rad, tables, 42, 7, 1000)
    c = model.sample_path(rad, tables, 42, 8, 1000)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    # a prefix of primes sees the same draws as a longer path
    d = model.sample_path(rad, tables, 42, 7, 100)
    assert np.array_equal(d.values, a.values[: len(d.values)])


def test_counter_draw_matches_stream(rad, tables):
    p = model.sample_path(rad, tables, 5, 3, 10**4)
    for i in (0, 1, 63, 64, 65, 200, len(p.values) - 1):
        assert model.rademacher_sign_at(5, 3, i) == p.values[i]


def test_sampler_mean(tables, rad):
    signs = model.sample_signs_batch(rad, 1, 2024, 0, 10**5)[:, 0].astype(float)
    assert abs(signs.mean()) < 4 / math.sqrt(10**5)


def test_finite_support_frequencies(tables):
    spec = ModelSpec.symmetric_finite(model.parse_support("-2:1/8,-1:3/8,1:3/8,2:1/8"))
    vals = np.concatenate([model.sample_values(spec, tables.primes_upto(1000), 3, i) for i in range(200)])
    for v, q in ((2, 1 / 8), (1, 3 / 8), (-1, 3 / 8), (-2, 1 / 8)):
        f = np.mean(vals == v)
        assert abs(f - q) < 4 * math.sqrt(q * (1 - q) / vals.size)


def test_theta_examples(tables, rad):
    path = model.fixed_path(tables, -1.0, 100)
    assert model.theta(path, tables, 4) == 0
    assert model.theta(path, tables, 6) == 1
    assert model.theta(path, tables, 1) == 1
    mu = tables.mobius(100)
    th = model.theta_array(path, tables, 100)
    assert np.array_equal(th[1:], mu[1:])


@given(st.integers(0, 2**32), st.integers(0, 50), st.integers(1, 3000))
@settings(max_examples=60, deadline=None)
def test_theta_matches_trial_division(tables, seed, pid, l):
    rad = ModelSpec.rademacher()
    path = model.sample_path(rad, tables, seed, pid, 3000)
    assert model.theta(path, tables, l) == brute_theta(path.as_dict(), l)


@given(st.integers(0, 2**32), st.lists(st.integers(1, 5000), min_size=1, max_size=6))
@settings(max_examples=40, deadline=None)
def test_partial_sums_match_direct_sum(tables, seed, grid):
    rad = ModelSpec.rademacher()
    grid = sorted(grid)
    path = model.sample_path(rad, tables, seed, 0, 5000)
    vals = path.as_dict()
    direct = [sum(brute_theta(vals, l) for l in range(1, n + 1)) for n in grid]
    assert model.partial_sums(path, tables, grid) == direct


def test_partial_sum_examples(tables):
    plus = model.fixed_path(tables, 1.0, 10)
    assert model.partial_sums(plus, tables, [10]) == [7]
    minus = model.fixed_path(tables, -1.0, 100)
    assert model.partial_sums(minus, tables, [10, 100]) == [-1, 1]


def test_simulation_agrees_with_single_paths(tables, rad):
    grid = [1, 10, 1000, 5000]
    S = model.simulate_partial_sums(rad, tables, grid, 40, 77, first_path=3)
    for i in range(40):
        path = model.sample_path(rad, tables, 77, 3 + i, 5000)
        assert list(S[i]) == model.partial_sums(path, tables, grid)


def test_simulation_thread_invariance(tables, rad):
    spec = ModelSpec.symmetric_finite(model.parse_support("-2:1/4,-1:1/4,1:1/4,2:1/4"))
    for s in (rad, spec):
        a = model.simulate_partial_sums(s, tables, [100, 10**4], 5000, 9, threads=1)
        b = model.simulate_partial_sums(s, tables, [100, 10**4], 5000, 9, threads=8)
        assert np.array_equal(a, b)


def test_grid_validation(tables, rad):
    path = model.fixed_path(tables, 1.0, 100)
    with pytest.raises(InvalidArgument):
        model.partial_sums(path, tables, [])
    with pytest.raises(InvalidArgument):
        model.partial_sums(path, tables, [10, 5])
    with pytest.raises(OutOfRange):
        model.partial_sums(path, tables, [10**6])


def test_decomposition_examples(tables, rad):
    for eps in itertools.product((-1.0, 1.0), repeat=4):
        vals = dict(zip((2, 3, 5, 7), eps))
        path = model.SamplePath(rad, 0, 0, tables.primes_upto(10), np.array(eps))
        head, parts = model.martingale_decomposition(path, tables, 10)
        assert head == 1
        assert parts[2] == vals[2]
        assert parts[5] == vals[5] + vals[2] * vals[5]
        assert parts[7] == vals[7]


@pytest.mark.parametrize("pid", range(100))
def test_decomposition_identity_at_1e4(tables, rad, pid):
    path = model.sample_path(rad, tables, 123, pid, 10**4)
    head, parts = model.martingale_decomposition(path, tables, 10**4)
    assert head + sum(parts.values()) == model.partial_sums(path, tables, [10**4])[0]


def test_delta_split(tables):
    inside, outside = model.delta_split(tables, 10)
    assert inside == [2]  # (ln 5)^3 ~ 4.17 > 2
    assert sorted(inside + outside) == [2, 3, 5, 7]
    for n in (10, 30, 1000, 10**5):
        inside, outside = model.delta_split(tables, n)
        assert set(inside).isdisjoint(outside)
        assert sorted(inside + outside) == [int(p) for p in tables.primes_upto(n)]
        assert n not in inside
        for p in inside:
            assert p < math.log(n / p) ** 3
    # the two parses of the inequality differ already at n = 10
    assert model.delta_split(tables, 10, "log-of-cube")[0] == [2, 3]
    assert model.delta_split(tables, 30, "log-of-cube")[0] == [2, 3, 5]


def test_sup_norm_examples(tables, rad):
    assert model.sup_norm_Mp(rad, tables, 10, 5) == 2
    assert model.sup_norm_Mp(rad, tables, 10, 2) == 1
    assert model.sup_norm_Mp(rad, tables, 10, 7) == 1
    spec = ModelSpec.symmetric_finite(model.parse_support("-2:1/2,2:1/2"))
    assert model.sup_norm_Mp(spec, tables, 10, 5) == 2 + 4


def test_sup_norm_by_brute_force(tables, rad):
    n = 30
    primes = [int(p) for p in tables.primes_upto(n)]
    for p in primes:
        best = 0.0
        for eps in itertools.product((-1.0, 1.0), repeat=len(primes)):
            path = model.SamplePath(rad, 0, 0, tables.primes_upto(n), np.array(eps))
            best = max(best, abs(model.martingale_decomposition(path, tables, n)[1][p]))
        assert model.sup_norm_Mp(rad, tables, n, p) == best


def test_sup_norm_budget(tables, rad):
    with pytest.raises(BudgetExceeded):
        model.sup_norm_Mp(rad, tables, 10**4, 97, budget=10)


def test_conditional_means_vanish(tables, rad):
    for p in tables.primes_upto(30):
        assert all(v == 0 for v in model.conditional_means_Mp(rad, tables, 30, int(p)))


def test_mp_term_count(tables):
    assert model.mp_term_count(tables, 10, 5) == 2
    assert model.mp_term_count(tables, 10, 2) == 1


def test_path_csv(tables, rad, tmp_path):
    path = model.sample_path(rad, tables, 1, 2, 20)
    text = model.path_to_csv(path, tmp_path / "p.csv")
    lines = text.splitlines()
    assert lines[0] == "prime,value"
    assert len(lines) == 1 + 8
    assert (tmp_path / "p.csv").read_text() == text
