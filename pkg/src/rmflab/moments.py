"""Exact expectations by sign-space enumeration, independent oracles, and Monte Carlo estimators."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from . import _kernels
from .errors import BudgetExceeded, InternalConsistencyError, InvalidArgument, Unsupported
from .model import ModelSpec, simulate_partial_sums, squarefree_layout
from .parallel import map_chunks
from .sieve import SieveTables, squarefree_count

ENUMERATION = "enumeration"
FORMULA = "formula"
TUPLE_ORACLE = "tuple-oracle"
MONTE_CARLO = "monte-carlo"

ENUM_BUDGET = 25


@dataclass(frozen=True)
class MomentReport:
    n: int
    parameter: str
    value: float | Fraction
    standard_error: float
    method: str
    paths: int = 0
    seed: int | None = None
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        exact = self.method in (ENUMERATION, FORMULA, TUPLE_ORACLE)
        if exact and self.standard_error != 0:
            raise InvalidArgument("exact reports carry standard_error = 0")
        if self.method == MONTE_CARLO and not (self.paths > 0 and math.isfinite(self.standard_error)):
            raise InvalidArgument("Monte Carlo reports need paths > 0 and a finite standard error")

    def row(self) -> dict:
        row = {
            "n": self.n,
            "parameter": self.parameter,
            "value": self.value,
            "se": self.standard_error,
            "method": "exact" if self.method != MONTE_CARLO else MONTE_CARLO,
            "paths": self.paths,
            "seed": "" if self.seed is None else self.seed,
        }
        if self.lower is not None:
            row["lower"] = self.lower
            row["upper"] = self.upper
        return row


# -- exact distribution of S_n -------------------------------------------------------


@dataclass(frozen=True)
class ExactDistribution:
    """counts[v] = number of sign vectors in {+-1}^pi(n) with S_n = v."""

    n: int
    counts: dict[int, int]
    log2_total: int

    @property
    def total(self) -> int:
        return 1 << self.log2_total

    def raw_moment(self, q: int) -> Fraction:
        return Fraction(sum(c * v**q for v, c in self.counts.items()), self.total)

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        vals = np.array(list(self.counts), dtype=float)
        w = np.array([c / self.total for c in self.counts.values()])
        return math.fsum(w * f(vals))

    def prob_at_least(self, t0: float) -> Fraction:
        return Fraction(sum(c for v, c in self.counts.items() if v >= t0), self.total)


def _gray_chunks(m: int) -> list[tuple[int, int]]:
    # fixed high-order prefix partition, independent of the thread count
    prefix_bits = min(m, 6)
    size = 1 << (m - prefix_bits)
    return [(i * size, (i + 1) * size) for i in range(1 << prefix_bits)]


@lru_cache(maxsize=64)
def _exact_distribution(t: SieveTables, n: int, budget: int, threads: int | None) -> ExactDistribution:
    lay = squarefree_layout(t, n)
    primes = [int(p) for p in t.primes_upto(n)]
    # primes in (n/2, n] occur only in theta_p = X_p; their sum is binomial and is convolved in exactly
    core = [p for p in primes if 2 * p <= n]
    tail = len(primes) - len(core)
    if len(core) > budget:
        raise BudgetExceeded(f"exact enumeration over 2^{len(core)} sign vectors (pi({n // 2}) = {len(core)}) exceeds budget 2^{budget}")
    vals = [int(l) for l in lay.values]
    keep = [j for j, l in enumerate(vals) if not (l > 1 and t.is_squarefree[l] and t.prime_index(l) >= 0 and 2 * l > n)]
    pos = {vals[j]: i for i, j in enumerate(keep)}
    # Gray bit 0 flips most often: give it the prime with the fewest multiples
    order = sorted(core, reverse=True)
    ptr, idx = [0], []
    for p in order:
        idx.extend(pos[l] for l in range(p, n + 1, p) if l in pos)
        ptr.append(len(idx))
    mult_ptr = np.array(ptr, dtype=np.int64)
    mult_idx = np.array(idx, dtype=np.int64)
    s_len = len(keep)
    m = len(order)

    def work(lo: int, hi: int) -> np.ndarray:
        hist = np.zeros(2 * s_len + 1, dtype=np.int64)
        return _kernels.gray_histogram(m, lo, hi, mult_ptr, mult_idx, s_len, hist, s_len)

    hist = [0] * (2 * s_len + 1)
    for part in map_chunks(work, _gray_chunks(m), threads):
        for i, c in enumerate(part):
            hist[i] += int(c)
    core_counts = {i - s_len: c for i, c in enumerate(hist) if c}
    counts: Counter[int] = Counter()
    for j in range(tail + 1):
        b = math.comb(tail, j)
        shift = tail - 2 * j
        for v, c in core_counts.items():
            counts[v + shift] += b * c
    if sum(counts.values()) != 1 << len(primes):
        raise InternalConsistencyError("sign-space histogram does not cover 2^pi(n) vectors")
    return ExactDistribution(n, dict(sorted(counts.items())), len(primes))


def exact_distribution(t: SieveTables, n: int, budget: int = ENUM_BUDGET, threads: int | None = None) -> ExactDistribution:
    """Distribution of S_n under the Rademacher model by full sign-space enumeration."""
    n = t.check(n)
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    return _exact_distribution(t, n, budget, 1 if threads is None else int(threads))


def _require_rademacher(spec: ModelSpec | None):
    if spec is not None and spec.family != "rademacher":
        raise Unsupported(f"exact enumeration supports the Rademacher model only, not {spec.family}")


def exact_moment_enumeration(t: SieveTables, n: int, r: int, spec: ModelSpec | None = None, budget: int = ENUM_BUDGET) -> Fraction:
    """E[S_n^(2r)] exactly; the value is a tuple count, hence an integer."""
    _require_rademacher(spec)
    if r < 0:
        raise InvalidArgument("r must be >= 0")
    val = exact_distribution(t, n, budget).raw_moment(2 * r)
    if val.denominator != 1:
        raise InternalConsistencyError(f"E[S_{n}^{2 * r}] = {val} is not an integer")
    return val


def exact_raw_moment(t: SieveTables, n: int, q: int, budget: int = ENUM_BUDGET) -> Fraction:
    """E[S_n^q] for any q >= 0 (odd q included; theta_1 = 1 makes these nonzero)."""
    return exact_distribution(t, n, budget).raw_moment(q)


def tuple_count(t: SieveTables, n: int, q: int, limit: int = 10**7) -> int:
    """Number of q-tuples of squarefree integers <= n whose product is a perfect square.

    Direct count: extends tuples one coordinate at a time, keyed by the XOR of
    exponent vectors so far.
    """
    sf = [int(l) for l in t.squarefree_upto(n)]
    states = 1 << min(t.prime_count(n), 62)
    if q * len(sf) * min(states, len(sf) ** max(q - 1, 0)) > limit:
        raise BudgetExceeded(f"tuple count for n={n}, q={q} exceeds {limit} steps")
    vecs = []
    for l in sf:
        v = 0
        for p in t.distinct_prime_factors(l):
            v |= 1 << t.prime_index(p)
        vecs.append(v)
    state: Counter[int] = Counter({0: 1})
    for _ in range(q):
        nxt: Counter[int] = Counter()
        for acc, c in state.items():
            for v in vecs:
                nxt[acc ^ v] += c
        state = nxt
    return state[0]


def tuple_count_oracle(t: SieveTables, n: int, r: int) -> int:
    """Count of 2r-tuples with square product, which equals E[S_n^(2r)] for Rademacher X_p."""
    if r < 0:
        raise InvalidArgument("r must be >= 0")
    return tuple_count(t, n, 2 * r)


def second_moment_formula(spec: ModelSpec, t: SieveTables, n: int) -> Fraction:
    """||S_n||_2^2 = sum over squarefree l <= n of prod_{p | l} E[X_p^2]."""
    n = t.check(n)
    if spec.family != "symmetric-finite":
        return Fraction(squarefree_count(t, n))
    lay = squarefree_layout(t, n)
    primes = t.primes_upto(n)
    v = [spec.second_moment(int(p)) for p in primes]
    w = [Fraction(1)] * len(lay.values)
    for j in range(1, len(lay.values)):
        w[j] = w[lay.parent[j]] * v[lay.pidx[j]]
    return sum(w, Fraction(0))


def exact_charfn(t: SieveTables, n: int, t_val: float, budget: int = ENUM_BUDGET) -> tuple[float, float]:
    """(E[cos(t S_n)], E[sin(t S_n)]) by enumeration."""
    d = exact_distribution(t, n, budget)
    return d.expect(lambda s: np.cos(t_val * s)), d.expect(lambda s: np.sin(t_val * s))


def exact_log_mgf(t: SieveTables, n: int, lam: float, budget: int = ENUM_BUDGET) -> float:
    d = exact_distribution(t, n, budget)
    vals = np.array(list(d.counts), dtype=float)
    logc = np.array([math.log(c) for c in d.counts.values()])
    return float(special.logsumexp(lam * vals + logc) - d.log2_total * math.log(2))


def exact_mgf(t: SieveTables, n: int, lam: float, budget: int = ENUM_BUDGET) -> float:
    """E[exp(lam S_n)], accumulated in log-sum-exp form."""
    return math.exp(exact_log_mgf(t, n, lam, budget))


def exact_kurtosis(t: SieveTables, n: int) -> Fraction:
    """E[S_n^4] / E[S_n^2]^2."""
    d = exact_distribution(t, n)
    return d.raw_moment(4) / d.raw_moment(2) ** 2


# -- Monte Carlo -------------------------------------------------------------------


def _check_paths(paths: int, minimum: int):
    if paths < minimum:
        raise InvalidArgument(f"need at least {minimum} paths, got {paths}")


def mc_moments(
    spec: ModelSpec,
    t: SieveTables,
    n_grid: Sequence[int],
    r_list: Sequence[int],
    paths: int,
    seed: int,
    threads: int | None = None,
) -> list[MomentReport]:
    """Sample means of S_n^(2r); the jackknife SE of a mean is sd / sqrt(paths)."""
    _check_paths(paths, 2)
    S = simulate_partial_sums(spec, t, n_grid, paths, seed, threads)
    reports = []
    for g, n in enumerate(n_grid):
        for r in r_list:
            x = S[:, g] ** (2 * r)
            se = float(np.std(x, ddof=1) / math.sqrt(paths))
            reports.append(MomentReport(int(n), f"2r={2 * r}", float(np.mean(x)), se, MONTE_CARLO, paths, seed))
    return reports


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def mc_tail(
    spec: ModelSpec,
    t: SieveTables,
    n: int,
    t0_grid: Sequence[float],
    paths: int,
    seed: int,
    threads: int | None = None,
    z: float = 1.96,
) -> list[MomentReport]:
    """Empirical P(S_n >= t0) with Wilson intervals; the reported SE is the interval half-width / z."""
    _check_paths(paths, 100)
    S = simulate_partial_sums(spec, t, [n], paths, seed, threads)[:, 0]
    out = []
    for t0 in t0_grid:
        k = int(np.count_nonzero(S >= t0))
        lo, hi = wilson_interval(k, paths, z)
        out.append(MomentReport(int(n), f"t0={t0:g}", k / paths, (hi - lo) / (2 * z), MONTE_CARLO, paths, seed, lo, hi))
    return out


A_RULES = ("sqrt-n", "sqrt-n-over-log-n", "b-n")


def normalizer(rule: str | Callable[[int], float]) -> Callable[[int], float]:
    """a_n by name or user callable."""
    if callable(rule):
        return rule
    if rule == "sqrt-n":
        return lambda n: math.sqrt(n)
    if rule == "sqrt-n-over-log-n":
        return lambda n: math.sqrt(n / math.log(n)) if n > 1 else 0.0
    if rule == "b-n":
        return lambda n: math.sqrt(n) * math.log(math.log(n)) ** -0.25 if n > math.e else 0.0
    raise InvalidArgument(f"unknown a_n rule {rule!r}; expected one of {A_RULES} or a formula")


def formula_normalizer(expr: str) -> Callable[[int], float]:
    """a_n from an arithmetic expression in ``n`` using functions from ``math``."""
    names = {k: getattr(math, k) for k in dir(math) if not k.startswith("_")}
    try:
        code = compile(expr, "<a_n>", "eval")
    except SyntaxError as e:
        raise InvalidArgument(f"bad a_n formula {expr!r}: {e}") from None
    bad = set(code.co_names) - set(names) - {"n"}
    if bad:
        raise InvalidArgument(f"a_n formula uses unknown names {sorted(bad)}")
    return lambda n: float(eval(code, {"__builtins__": {}}, {**names, "n": n}))


def mc_charfn_decay(
    spec: ModelSpec,
    t: SieveTables,
    n_grid: Sequence[int],
    t_val: float,
    a_rule: str | Callable[[int], float],
    paths: int,
    seed: int,
    threads: int | None = None,
) -> list[MomentReport]:
    """Estimates of E[cos(t S_n / a_n)] across the grid."""
    _check_paths(paths, 2)
    a = normalizer(a_rule)
    scales = []
    for n in n_grid:
        try:
            an = a(int(n))
        except (ValueError, ZeroDivisionError):
            an = 0.0
        if not an > 0 or not math.isfinite(an):
            raise InvalidArgument(f"a_n evaluates to {an} at n={n}")
        scales.append(an)
    S = simulate_partial_sums(spec, t, n_grid, paths, seed, threads)
    out = []
    for g, n in enumerate(n_grid):
        c = np.cos(t_val * S[:, g] / scales[g])
        se = float(np.std(c, ddof=1) / math.sqrt(paths))
        out.append(MomentReport(int(n), f"t={t_val:g};a_n={scales[g]:.6g}", float(np.mean(c)), se, MONTE_CARLO, paths, seed))
    return out


@dataclass(frozen=True)
class NormalityReport:
    n: int
    samples: int
    kurtosis_ratio: float
    excess_kurtosis: float
    kurtosis_se: float
    ks_distance: float
    ks_pvalue: float


def jackknife_kurtosis(x: np.ndarray) -> tuple[float, float]:
    """E[X^4]/E[X^2]^2 (moments about zero) and its leave-one-out jackknife SE."""
    x = np.asarray(x, dtype=float)
    N = x.size
    x2, x4 = x * x, x**4
    s2, s4 = math.fsum(x2), math.fsum(x4)
    if s2 == 0:
        raise InvalidArgument("zero second moment: kurtosis undefined")
    k = (s4 / N) / (s2 / N) ** 2
    m2 = (s2 - x2) / (N - 1)
    m4 = (s4 - x4) / (N - 1)
    loo = m4 / m2**2
    se = math.sqrt((N - 1) / N * float(np.sum((loo - loo.mean()) ** 2)))
    return k, se


def normality_diagnostics(samples: Sequence[float], n: int, Q_n: float) -> NormalityReport:
    """Kurtosis (about 0, with jackknife SE) and KS distance to N(0, Q_n)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise InvalidArgument(f"need at least 1000 samples, got {x.size}")
    if np.all(x == x[0]):
        raise InvalidArgument("samples are constant (zero variance)")
    k, se = jackknife_kurtosis(x)
    ks = stats.kstest(x, "norm", args=(0.0, math.sqrt(Q_n)))
    return NormalityReport(int(n), int(x.size), k, k - 3.0, se, float(ks.statistic), float(ks.pvalue))


def geometric_grid(n_max: int, factor: int = 2) -> list[int]:
    grid, n = [], 1
    while n < n_max:
        grid.append(n)
        n *= factor
    grid.append(n_max)
    return grid


@dataclass(frozen=True)
class GrowthReport:
    n_max: int
    eps: float
    paths: int
    seed: int
    grid: tuple[int, ...]
    quantiles: dict[float, float]
    argmax_counts: dict[int, int]


def path_growth_report(
    spec: ModelSpec,
    t: SieveTables,
    n_max: int,
    eps: float,
    paths: int,
    seed: int,
    quantiles: Sequence[float] = (0.5, 0.9, 0.99),
    threads: int | None = None,
) -> GrowthReport:
    """Quantiles across paths of sup over a doubling n-grid of n^(-1/2-eps) |S_n|."""
    if not eps > 0:
        raise InvalidArgument("eps must be > 0")
    _check_paths(paths, 1)
    grid = geometric_grid(n_max)
    S = simulate_partial_sums(spec, t, grid, paths, seed, threads)
    scale = np.array(grid, dtype=float) ** (-0.5 - eps)
    Z = np.abs(S) * scale
    sup = Z.max(axis=1)
    arg = Counter(int(grid[i]) for i in Z.argmax(axis=1))
    q = {float(p): float(np.quantile(sup, p)) for p in quantiles}
    return GrowthReport(n_max, eps, paths, seed, tuple(grid), q, dict(sorted(arg.items())))
