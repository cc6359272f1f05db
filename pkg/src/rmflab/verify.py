"""Cross-module invariant suite behind ``rmflab verify``.

Each check returns a row (name, status, detail). Details contain only
computed quantities, never timings, so the table is reproducible byte for
byte for a given seed whatever the thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds, model, moments, sieve, squaresets
from .errors import InvalidArgument
from .model import ModelSpec

LEVELS = ("quick", "full")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def row(self) -> dict:
        return {"check": self.name, "status": "PASS" if self.passed else "FAIL", "detail": self.detail}


@dataclass(frozen=True)
class Sizes:
    density_n: int
    brute_n: int
    code_n: int
    badset_ineq_n: int
    decomp_n: int
    decomp_paths: int
    mc_paths: int


SIZES = {
    "quick": Sizes(10**5, 14, 30, 24, 10**3, 10, 10**4),
    "full": Sizes(10**6, 20, 60, 40, 10**4, 100, 10**5),
}


def _density(t, s: Sizes, seed, threads):
    q = sieve.squarefree_count(t, s.density_n)
    err = abs(q / s.density_n - 6 / math.pi**2)
    return err < 1e-3 if s.density_n < 10**6 else err < 1e-4, f"Q({s.density_n})={q} |Q/n-6/pi^2|={err:.3e}"


def _mertens(t, s, seed, threads):
    mob = ModelSpec.mobius_deterministic()
    path = model.fixed_path(t, -1.0, 100)
    got = model.partial_sums(path, t, [10, 100])
    sim = model.simulate_partial_sums(mob, t, [10, 100], 1, seed, threads)[0]
    ok = got == [-1.0, 1.0] and list(sim) == got
    return ok, f"M(10)={got[0]:g} M(100)={got[1]:g}"


def _badset_methods(t, s, seed, threads):
    bad = []
    for n in range(1, s.code_n + 1):
        m = squaresets.build_exponent_matrix(t, n)
        k = squaresets.badset_counts_kernel(m, threads=threads)
        w = squaresets.badset_counts_macwilliams(m, threads=threads)
        if not k.same_counts(w):
            bad.append(n)
        if n <= s.brute_n and not squaresets.brute_force_badsets(t, n).same_counts(k):
            bad.append(n)
    spot = squaresets.badset_counts(t, 10).counts
    ok = not bad and spot == {0: 1, 1: 1, 3: 2, 4: 3, 5: 1}
    return ok, f"brute n<={s.brute_n} code n<={s.code_n} mismatches={sorted(set(bad))} B(4,10)={spot.get(4)}"


def _tuple_oracle(t, s, seed, threads):
    bad = [(n, q) for n in range(1, 9) for q in range(0, 7) if moments.exact_raw_moment(t, n, q) != moments.tuple_count(t, n, q)]
    ok = not bad and moments.exact_moment_enumeration(t, 3, 1) == 3 and moments.exact_moment_enumeration(t, 3, 2) == 21
    return ok, f"n<=8 q<=6 mismatches={bad}"


def _second_moment(t, s, seed, threads):
    rad = ModelSpec.rademacher()
    bad = [n for n in range(1, 41) if not (moments.exact_moment_enumeration(t, n, 1) == moments.second_moment_formula(rad, t, n) == sieve.squarefree_count(t, n))]
    return not bad, f"n<=40 mismatches={bad}"


def _badset_inequality(t, s, seed, threads):
    bad = []
    for n in range(1, s.badset_ineq_n + 1):
        d = squaresets.badset_counts(t, n, threads=threads)
        for r in (1, 2, 3):
            if moments.exact_moment_enumeration(t, n, r) < math.factorial(2 * r) * d.B(r):
                bad.append((n, r))
    return not bad, f"n<={s.badset_ineq_n} r<=3 violations={bad}"


def _decomposition(t, s, seed, threads):
    rad = ModelSpec.rademacher()
    worst = 0.0
    for pid in range(s.decomp_paths):
        path = model.sample_path(rad, t, seed, pid, s.decomp_n)
        head, parts = model.martingale_decomposition(path, t, s.decomp_n)
        total = model.partial_sums(path, t, [s.decomp_n])[0]
        worst = max(worst, abs(head + sum(parts.values()) - total))
    return worst == 0, f"n={s.decomp_n} paths={s.decomp_paths} max|residual|={worst:g}"


def _conditional_zero(t, s, seed, threads):
    rad = ModelSpec.rademacher()
    bad = [p for p in t.primes_upto(30) if any(v != 0 for v in model.conditional_means_Mp(rad, t, 30, int(p)))]
    return not bad, f"n=30 nonzero conditional means at p={bad}"


def _azuma(t, s, seed, threads):
    rad = ModelSpec.rademacher()
    worst = -math.inf
    for n in (10, 20, 30):
        split = bounds.azuma_split(rad, t, n)
        for lam in (0.1, 0.5, 1.0, 2.0):
            # compared on the log scale; the theta_1 = 1 term is carried as a shift
            margin = moments.exact_log_mgf(t, n, lam) - (lam + lam * lam * split.variance_proxy)
            worst = max(worst, margin)
    return worst <= 1e-12, f"max log E[exp(lam S)] - (lam + lam^2 V) = {worst:.6f}"


def _dickman(t, s, seed, threads):
    err = abs(sieve.dickman_rho(2.0) - (1 - math.log(2)))
    u = np.linspace(1, 10, 901)
    mono = bool(np.all(np.diff(sieve.dickman_rho_array(u)) <= 0))
    return err < 1e-8 and mono, f"|rho(2)-(1-ln 2)|={err:.2e} non-increasing={mono}"


def _mc_calibration(t, s, seed, threads):
    rad = ModelSpec.rademacher()
    reps = moments.mc_moments(rad, t, [30], [1, 2], s.mc_paths, seed, threads)
    z = [abs(r.value - float(moments.exact_moment_enumeration(t, 30, k))) / r.standard_error for r, k in zip(reps, (1, 2))]
    return max(z) < 4, f"n=30 paths={s.mc_paths} z(E S^2)={z[0]:.3f} z(E S^4)={z[1]:.3f}"


def _g_profile(t, s, seed, threads):
    reps = [bounds.g_sign_changes(n, grid_points=20_000) for n in (3, 10, 100, 10**4, 10**6)]
    return all(r.sign_changes == 1 for r in reps), "sign changes " + " ".join(f"n={r.n}:{r.sign_changes}" for r in reps)


def _delta_rule(t, s, seed, threads):
    p = bounds.BoundParams(kappa2=1.0)
    return p.delta_decays(), f"kappa2=1 delta(1e2)={p.delta(100):.6f} delta(1e16)={p.delta(10**16):.6f}"


CHECKS: list[tuple[str, Callable]] = [
    ("sieve.squarefree_density", _density),
    ("model.mertens_realization", _mertens),
    ("model.martingale_identity", _decomposition),
    ("model.conditional_zero", _conditional_zero),
    ("squaresets.method_agreement", _badset_methods),
    ("moments.tuple_oracle", _tuple_oracle),
    ("moments.second_moment", _second_moment),
    ("moments.badset_inequality", _badset_inequality),
    ("moments.mc_calibration", _mc_calibration),
    ("bounds.azuma_mgf_shifted", _azuma),
    ("bounds.g_sign_change", _g_profile),
    ("bounds.delta_rule_decay", _delta_rule),
    ("sieve.dickman", _dickman),
]


def run_suite(level: str = "quick", seed: int = 0, threads: int | None = None, tables: sieve.SieveTables | None = None) -> list[CheckResult]:
    if level not in LEVELS:
        raise InvalidArgument(f"level must be one of {LEVELS}")
    s = SIZES[level]
    t = tables if tables is not None and tables.n_max >= s.density_n else sieve.build_tables(s.density_n)
    out = []
    for name, fn in CHECKS:
        ok, detail = fn(t, s, seed, threads)
        out.append(CheckResult(name, bool(ok), detail))
    return out
