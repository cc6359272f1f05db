"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Tolerances are the pinned ones. A criterion that fails is left failing.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from rmflab import bounds, model, moments, sieve, squaresets
from rmflab.model import ModelSpec

SEED = 20261018
RAD = ModelSpec.rademacher()


def gate(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def t5():
    return sieve.build_tables(10**5)


def test_c01_squarefree_density():
    start = time.perf_counter()
    t = sieve.build_tables(10**6)
    q = sieve.squarefree_count(t, 10**6)
    elapsed = time.perf_counter() - start
    err = abs(q / 10**6 - 6 / math.pi**2)
    gate(1, err < 1e-4 and elapsed < 5, f"Q(1e6)/1e6={q / 10**6} |diff|={err:.2e} (tol 1e-4) time={elapsed:.2f}s (limit 5s)")


def test_c02_badset_agreement(t5):
    start = time.perf_counter()
    bad = []
    for n in range(1, 61):
        m = squaresets.build_exponent_matrix(t5, n)
        k = squaresets.badset_counts_kernel(m)
        w = squaresets.badset_counts_macwilliams(m)
        if not k.same_counts(w):
            bad.append(("kernel/macwilliams", n))
        if n <= 20 and not squaresets.brute_force_badsets(t5, n).same_counts(k):
            bad.append(("brute", n))
    d10 = squaresets.badset_counts(t5, 10)
    elapsed = time.perf_counter() - start
    ok = not bad and d10.counts == {0: 1, 1: 1, 3: 2, 4: 3, 5: 1} and d10.B(2) == 3 and elapsed < 120
    gate(2, ok, f"mismatches={bad} dist(10)={d10.counts} time={elapsed:.2f}s (limit 120s)")


def test_c03_exact_moments(t5):
    m2 = moments.exact_moment_enumeration(t5, 3, 1)
    m4 = moments.exact_moment_enumeration(t5, 3, 2)
    bad = [(n, r) for n in range(1, 9) for r in range(1, 4) if moments.exact_moment_enumeration(t5, n, r) != moments.tuple_count_oracle(t5, n, r)]
    gate(3, m2 == 3 and m4 == 21 and not bad, f"E[S_3^2]={m2} E[S_3^4]={m4} oracle mismatches={bad}")


def test_c04_moment_badset_inequality(t5):
    bad = []
    for n in range(1, 41):
        d = squaresets.badset_counts(t5, n)
        for r in (1, 2, 3):
            if moments.exact_moment_enumeration(t5, n, r) < math.factorial(2 * r) * d.B(r):
                bad.append((n, r))
    gate(4, not bad, f"violations over n<=40, r<=3: {bad}")


def test_c05_martingale_suite(t5):
    worst = 0.0
    for pid in range(100):
        path = model.sample_path(RAD, t5, SEED, pid, 10**4)
        head, parts = model.martingale_decomposition(path, t5, 10**4)
        worst = max(worst, abs(head + sum(parts.values()) - model.partial_sums(path, t5, [10**4])[0]))
    nonzero = [int(p) for p in t5.primes_upto(30) if any(v != 0 for v in model.conditional_means_Mp(RAD, t5, 30, int(p)))]
    gate(5, worst == 0 and not nonzero, f"max residual over 100 paths at n=1e4: {worst}; primes with nonzero conditional mean at n=30: {nonzero}")


def _azuma_table(t5):
    out = []
    for n in (10, 20, 30):
        split = bounds.azuma_split(RAD, t5, n)
        for lam in (0.1, 0.5, 1.0, 2.0):
            out.append((n, lam, moments.exact_log_mgf(t5, n, lam), split.variance_proxy))
    return out


def test_c06_azuma_mgf_literal(t5):
    # log E[exp(lam S_n)] <= lam^2 V, with V from exact sup norms
    rows = _azuma_table(t5)
    bad = [(n, lam, round(lm, 5), round(lam * lam * v, 5)) for n, lam, lm, v in rows if lm > lam * lam * v]
    gate(6, not bad, f"violations (n, lam, log MGF, lam^2 V): {bad}")


def test_c06b_azuma_mgf_with_theta1(t5):
    # same bound for S_n - theta_1, the part the martingale differences actually sum to
    rows = _azuma_table(t5)
    bad = [(n, lam) for n, lam, lm, v in rows if lm - lam > lam * lam * v]
    gate("6b", not bad, f"shifted form log E[exp(lam (S_n - 1))] <= lam^2 V; violations: {bad}")


def test_c07_monte_carlo_calibration(t5):
    start = time.perf_counter()
    reps = moments.mc_moments(RAD, t5, [30], [1, 2], 10**5, SEED)
    z = [abs(r.value - float(moments.exact_moment_enumeration(t5, 30, k))) / r.standard_error for r, k in zip(reps, (1, 2))]
    scaled = {}
    for N in (10**3, 10**4, 10**5):
        rr = moments.mc_moments(RAD, t5, [30], [1, 2], N, SEED + 1)
        scaled[N] = [r.standard_error * math.sqrt(N) for r in rr]
    spread = [max(v[i] for v in scaled.values()) / min(v[i] for v in scaled.values()) for i in (0, 1)]
    elapsed = time.perf_counter() - start
    ok = max(z) < 4 and max(spread) <= 2 and elapsed < 60
    gate(7, ok, f"z(E S^2)={z[0]:.3f} z(E S^4)={z[1]:.3f} (tol 4); SE*sqrt(N) spread={spread[0]:.3f},{spread[1]:.3f} (tol 2); time={elapsed:.1f}s")


def test_c08_mertens(t5):
    mob = ModelSpec.mobius_deterministic()
    S = model.simulate_partial_sums(mob, t5, [10, 100], 1, SEED)[0]
    gate(8, list(S) == [-1, 1], f"S_10={S[0]:g} S_100={S[1]:g}")


def test_c09_dickman(t5):
    err = abs(sieve.dickman_rho(2.0) - (1 - math.log(2)))
    u = np.linspace(1, 10, 9001)
    mono = bool(np.all(np.diff(sieve.dickman_rho_array(u)) <= 0))
    x = 10**5
    ratios = []
    # every integer y with ln x / ln y in [1.5, 3]
    for y in range(math.ceil(x ** (1 / 3)), math.floor(x ** (1 / 1.5)) + 1):
        uu = math.log(x) / math.log(y)
        if 1.5 <= uu <= 3:
            ratios.append(sieve.smooth_count(t5, x, y) / (x * sieve.dickman_rho(uu)))
    ok = err < 1e-8 and mono and all(0.5 <= r <= 2 for r in ratios)
    gate(9, ok, f"|rho(2)-(1-ln2)|={err:.2e}; non-increasing={mono}; psi ratio over {len(ratios)} y values in [{min(ratios):.4f}, {max(ratios):.4f}]")


def test_c10_charfn_decay(t5):
    rule = "sqrt-n-over-log-n"
    lo_n, hi_n = 10**2, 10**5
    reps = moments.mc_charfn_decay(RAD, t5, [25, lo_n, hi_n], 1.0, rule, 10**5, SEED)
    small, lo, hi = reps
    a25 = moments.normalizer(rule)(25)
    exact25 = moments.exact_charfn(t5, 25, 1.0 / a25)[0]
    z25 = abs(small.value - exact25) / small.standard_error
    separated = abs(hi.value) + 2 * hi.standard_error < abs(lo.value) - 2 * lo.standard_error
    ok = separated and z25 < 4
    gate(10, ok, f"n=1e2: {lo.value:.4f}+-{2 * lo.standard_error:.4f}; n=1e5: {hi.value:.4f}+-{2 * hi.standard_error:.4f}; n=25 MC vs exact z={z25:.2f}")


def test_c11_kurtosis_growth(t5):
    k = [moments.exact_kurtosis(t5, n) for n in (20, 30, 40)]
    increasing = k[0] < k[1] < k[2]
    S = model.simulate_partial_sums(RAD, t5, [10**4], 10**5, SEED)[:, 0]
    mc, se = moments.jackknife_kurtosis(S)
    ok = increasing and mc - float(k[2]) > 2 * se
    gate(11, ok, f"exact kurtosis n=20,30,40: {[round(float(v), 4) for v in k]}; MC n=1e4: {mc:.3f} (SE {se:.3f})")


def test_c12_integral_boundedness():
    ratios = [bounds.integral_I(beta)[1] for beta in (2, 10, 1e2, 1e4, 1e6)]
    finite = all(math.isfinite(r) for r in ratios)
    spread = max(ratios) / min(ratios)
    gate(12, finite and spread < 10, f"I(beta)/ln(beta) = {[round(r, 4) for r in ratios]}; max/min={spread:.3f} (tol 10)")


def test_c13_verify_determinism():
    outs = [
        subprocess.run([sys.executable, "-m", "rmflab", "verify", "--level", "full", "--seed", str(SEED), "--threads", str(k)], capture_output=True)
        for k in (1, 8)
    ]
    ok = outs[0].stdout == outs[1].stdout and outs[0].returncode == 0 and outs[0].stdout
    gate(13, bool(ok), f"exit codes {[o.returncode for o in outs]}; byte-identical={outs[0].stdout == outs[1].stdout}")
