"""Closed-form moment, tail and counting bounds with every free constant exposed.

Evaluators are pure functions of their arguments. Where an inequality is only
claimed on a restricted range the value is still returned, wrapped in a
``Flagged`` carrying the reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidArgument
from .model import ModelSpec, delta_split, sup_norm_block, sup_norm_Mp
from .sieve import SieveTables
from .squaresets import WeightDistribution

CK_GUARD_FLOOR = 3  # ln ln k is evaluated at max(k, 3)


def _default_delta(kappa2: float) -> Callable[[int], float]:
    def rule(n: int) -> float:
        return kappa2 / math.log(math.log(n)) if n > math.e**math.e else kappa2
    return rule


@dataclass(frozen=True)
class BoundParams:
    """Free constants. ``delta_rule(n)`` stands in for every o(1) exponent."""

    c: float = 1.0
    c0_const: float = 1.0
    C: float = 1.0
    C1: float = 0.5
    C2: float = 1.0
    c1: float = 1.0
    kappa: float = 0.0
    kappa2: float = 0.0
    delta_rule: Callable[[int], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("c", "c0_const", "C", "C1", "C2", "c1"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidArgument(f"{name} must be a finite positive number, got {v}")
        if self.kappa2 < 0:
            raise InvalidArgument("kappa2 must be >= 0")

    def delta(self, n: int) -> float:
        rule = self.delta_rule or _default_delta(self.kappa2)
        d = float(rule(n))
        if d < 0 or not math.isfinite(d):
            raise InvalidArgument(f"delta_rule({n}) = {d}; must be finite and >= 0")
        return d

    def with_overrides(self, **kw) -> "BoundParams":
        return replace(self, **kw)

    def delta_decays(self, grid=(10**2, 10**4, 10**8, 10**16, 10**64)) -> bool:
        vals = [self.delta(n) for n in grid]
        return all(b <= a for a, b in zip(vals, vals[1:])) and (vals[-1] < vals[0] or vals[0] == 0)


class Flagged(NamedTuple):
    value: float
    in_hypothesis: bool
    note: str = ""


def _lnln(n: float) -> float:
    return math.log(math.log(n))


def m_n(M: float, n: int, p: BoundParams) -> float:
    """max(M,1)^(c ln n / ln ln n); for n < 16 the exponent is dropped and max(M,1) returned."""
    base = max(M, 1.0)
    if n < 16:
        return base
    return base ** (p.c * math.log(n) / _lnln(n))


def variance_sandwich(a: float, b: float, n: int, p: BoundParams) -> tuple[float, float]:
    if not (0 < a <= 1 <= b):
        raise InvalidArgument(f"need 0 < a <= 1 <= b, got a={a}, b={b}")
    if n < 16:
        raise InvalidArgument("variance sandwich needs n >= 16")
    ll = _lnln(n)
    lo = p.C1 * n ** (1 - p.c * abs(math.log(a)) / ll)
    hi = p.C2 * n ** (1 + p.c * math.log(b) / ll)
    return lo, hi


def c_k(k: int, p: BoundParams) -> float:
    """exp(-2k^2 ln k - 2k^2 ln ln max(k,3) + kappa k^2)."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    kk = k * k
    return math.exp(-2 * kk * math.log(k) - 2 * kk * _lnln(max(k, CK_GUARD_FLOOR)) + p.kappa * kk)


def momthm2_bound(p: BoundParams, n: int, k: int, M: float = 1.0) -> float:
    """C_k sqrt(n) M_n^(2k) (ln n)^(2k^2)."""
    if n < 16 or k < 1:
        raise InvalidArgument("need n >= 16 and k >= 1")
    return c_k(k, p) * math.sqrt(n) * m_n(M, n, p) ** (2 * k) * math.log(n) ** (2 * k * k)


def momthm2_bound_proof_variant(p: BoundParams, n: int, k: int, M: float = 1.0) -> float:
    """Same with the log exponent 2(2k-3) that the argument actually produces."""
    if n < 16 or k < 1:
        raise InvalidArgument("need n >= 16 and k >= 1")
    return c_k(k, p) * math.sqrt(n) * m_n(M, n, p) ** (2 * k) * math.log(n) ** (2 * (2 * k - 3))


def momthm_bound(p: BoundParams, n: int, q: float, M: float = 1.0) -> float:
    """C sqrt(q) M_n n^(2/3 + delta(n)), a bound on ||S_n||_q."""
    if q < 2:
        raise InvalidArgument("q must be >= 2")
    return p.C * math.sqrt(q) * m_n(M, n, p) * n ** (2 / 3 + p.delta(n))


def _u(p: BoundParams, n: int, M: float, const: float) -> float:
    if n < 16:
        raise InvalidArgument("need n >= 16")
    return const * m_n(M, n, p) * n ** (4 / 3 + p.delta(n))


def concent_bound(p: BoundParams, n: int, t0: float, M: float = 1.0) -> tuple[float, float]:
    """(u_n, exp(-t0^2/u_n)) with u_n = c0 M_n n^(4/3 + delta)."""
    u = _u(p, n, M, p.c0_const)
    return u, math.exp(-t0 * t0 / u)


def concent_bound_v(p: BoundParams, n: int, t0: float, M: float = 1.0, C0: float = 1.0) -> tuple[float, float]:
    """The v_n = 4 C0 M_n n^(4/3 + delta) form."""
    v = _u(p, n, M, 4 * C0)
    return v, math.exp(-t0 * t0 / v)


def momcor_bound(p: BoundParams, n: int, k: int) -> float:
    """C^(2k) (2k)^k n^(k(3/2 + delta)) / (2k)!, a bound on B_{2k,n}."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    return p.C ** (2 * k) * (2 * k) ** k * n ** (k * (1.5 + p.delta(n))) / math.factorial(2 * k)


def harper_range(p: BoundParams, n: int) -> tuple[int, float]:
    return 2, p.c * math.log(n) / _lnln(n)


def harper_badset_bound(p: BoundParams, n: int, k: int) -> Flagged:
    """C_k n^k (ln n)^(k(2k-3)) / (2k)!."""
    if k < 2:
        raise InvalidArgument("k must be >= 2")
    if n < 3:
        raise InvalidArgument("need n >= 3")
    val = c_k(k, p) * n**k * math.log(n) ** (k * (2 * k - 3)) / math.factorial(2 * k)
    lo, hi = harper_range(p, n)
    notes = []
    if k < CK_GUARD_FLOOR:
        notes.append("C_k uses ln ln 3 in place of ln ln k")
    ok = n > math.e and lo <= k <= hi
    if not ok:
        notes.append(f"k={k} outside [2, c ln n / ln ln n = {hi:.3g}]")
    return Flagged(val, ok, "; ".join(notes))


def hypercontractive_sum(t: SieveTables, n: int, q: float) -> int:
    if q < 1:
        raise InvalidArgument("q must be >= 1")
    n = t.check(n)
    base = math.ceil(2 * q - 1)
    om = t.omega[1 : n + 1][t.is_squarefree[1 : n + 1]]
    hist = np.bincount(om.astype(np.int64))
    return sum(int(c) * base**w for w, c in enumerate(hist))


def hypercontractive_bound(t: SieveTables, n: int, q: float) -> float:
    """(sum over squarefree l <= n of ceil(2q-1)^omega(l))^(1/2), a bound on ||S_n||_{2q}."""
    s = hypercontractive_sum(t, n, q)
    return math.sqrt(s) if s < 2**1000 else math.exp(0.5 * math.log(s))


def ass_k_range(p: BoundParams, n: int, eps: float) -> tuple[int, int]:
    lo = math.ceil(p.c1 * math.log(n) / _lnln(n))
    hi = math.floor(n ** (0.5 + eps))
    return max(lo, 1), hi


def assumption_ass_sum(
    B: WeightDistribution,
    n: int,
    t_val: float,
    a_n: float,
    M: float,
    p: BoundParams,
    eps: float = 0.1,
) -> float:
    """exp(-c0 n t^2 / a_n^2) * sum_k t^(2k) M_n^(2k) B_{2k,n} / a_n^(2k) over the admissible k."""
    if B.n != n:
        raise InvalidArgument(f"weight distribution is for n={B.n}, not {n}")
    if not a_n > 0:
        raise InvalidArgument("a_n must be > 0")
    lo, hi = ass_k_range(p, n, eps)
    top_weight = max(B.counts, default=0)
    if B.weight_cap is not None:
        missing = [k for k in range(lo, hi + 1) if 2 * k > B.weight_cap]
        if missing:
            raise InvalidArgument(f"weight distribution is capped at {B.weight_cap}; missing k = {missing[0]}..{missing[-1]}")
    if t_val == 0:
        return 0.0
    x = math.log(abs(t_val) * m_n(M, n, p) / a_n)
    terms = [2 * k * x + math.log(B.counts[2 * k]) for k in range(lo, min(hi, top_weight // 2) + 1) if B.counts.get(2 * k)]
    if not terms:
        return 0.0
    pre = -p.c0_const * n * t_val * t_val / (a_n * a_n)
    peak = max(terms)
    return math.exp(pre + peak + math.log(math.fsum(math.exp(v - peak) for v in terms)))


def _I_integrand(alpha: float, lnb: float) -> float:
    if alpha <= 0:
        return 1.0
    return math.exp(lnb * alpha / (alpha + 1) - 2 * alpha * math.log(alpha)) / (1 + alpha) ** 2


def integral_I(beta: float, rel_tail: float = 1e-12) -> tuple[float, float]:
    """I(beta) = int_0^inf beta^(a/(a+1)) exp(-2a ln a) / (1+a)^2 da and I(beta) / ln beta.

    The upper limit doubles until the integrand there is below rel_tail times
    the running value; the integrand decays like a^(-2a) so the neglected tail
    is of the same order.
    """
    if not beta >= 2:
        raise InvalidArgument("beta must be >= 2")
    lnb = math.log(beta)
    f = lambda a: _I_integrand(a, lnb)
    total = 0.0
    lo = 0.0
    for hi in (1.0, 4.0):
        v, _ = integrate.quad(f, lo, hi, limit=200, epsabs=0, epsrel=1e-13)
        total += v
        lo = hi
    while f(lo) >= rel_tail * total:
        hi = 2 * lo
        v, _ = integrate.quad(f, lo, hi, limit=200, epsabs=0, epsrel=1e-13)
        total += v
        lo = hi
    return total, total / lnb


def l3_supnorm_bound(n: int, p_prime: int, M: float, params: BoundParams) -> Flagged:
    """C1 M_n (n/p) (ln(n/p) / ln p)^(-ln(n/p) / ln p), stated for p >= (ln(n/p))^3."""
    if p_prime < 2 or p_prime > n:
        raise InvalidArgument(f"need 2 <= p <= n, got p={p_prime}, n={n}")
    r = n / p_prime
    lr, lp = math.log(r), math.log(p_prime)
    factor = 1.0 if lr == 0 else (lr / lp) ** (-lr / lp)
    val = params.C1 * m_n(M, n, params) * r * factor
    ok = p_prime >= lr**3
    return Flagged(val, ok, "" if ok else f"p={p_prime} < (ln(n/p))^3 = {lr**3:.4g}")


def smooth_squarefree_coprime_count(t: SieveTables, x: int, p: int) -> int:
    """#{k <= x squarefree, all prime factors < p} by direct scan."""
    if x < 1:
        return 0
    x = t.check(x)
    sf = t.is_squarefree[1 : x + 1]
    lpf = t.largest_prime_factor[1 : x + 1]
    return int(np.count_nonzero(sf & (lpf < p)))


# -- martingale MGF dominance -------------------------------------------------------


@dataclass(frozen=True)
class AzumaSplit:
    n: int
    delta_primes: tuple[int, ...]
    delta_sup: float
    other_sups: dict[int, float]

    @property
    def variance_proxy(self) -> float:
        """Square of the Delta_n block sup norm plus the squares of the remaining M_p sup norms."""
        return self.delta_sup**2 + math.fsum(v * v for v in self.other_sups.values())


def azuma_split(spec: ModelSpec, t: SieveTables, n: int, reading: str = "cube-of-log", budget: int = 20) -> AzumaSplit:
    inside, outside = delta_split(t, n, reading)
    dsup = sup_norm_block(spec, t, n, inside, budget) if inside else 0.0
    others = {p: sup_norm_Mp(spec, t, n, p, budget) for p in outside}
    return AzumaSplit(n, tuple(inside), dsup, others)


def azuma_mgf_bound(split: AzumaSplit, lam: float) -> float:
    """exp(lam^2 V) with V the variance proxy of the split."""
    return math.exp(lam * lam * split.variance_proxy)


def azuma_mgf_bound_shifted(split: AzumaSplit, lam: float, theta1: float = 1.0) -> float:
    """exp(lam theta_1 + lam^2 V): the same bound for S_n with the constant theta_1 term restored."""
    return math.exp(lam * theta1 + lam * lam * split.variance_proxy)


# -- auxiliary profile g_n ------------------------------------------------------------


def g_prime(alpha: np.ndarray | float, n: float):
    """G_n'(a) = 2 ln n / (1+a)^2 - 2 (1 + ln a)."""
    a = np.asarray(alpha, dtype=float)
    return 2 * math.log(n) / (1 + a) ** 2 - 2 * (1 + np.log(a))


@dataclass(frozen=True)
class SignChangeReport:
    n: int
    sign_changes: int
    root: float
    predicted: float


def g_sign_changes(n: int, grid_points: int = 200_000, alpha_max: float | None = None) -> SignChangeReport:
    """Count sign changes of G_n' on a log-spaced grid and locate the root by bisection."""
    if n < 3:
        raise InvalidArgument("need n >= 3")
    hi = alpha_max or max(10.0, 10 * math.log(n))
    a = np.geomspace(1e-8, hi, grid_points)
    s = np.sign(g_prime(a, n))
    changes = int(np.count_nonzero(s[1:] * s[:-1] < 0))
    root = float("nan")
    if changes:
        i = int(np.nonzero(s[1:] * s[:-1] < 0)[0][0])
        root = optimize.brentq(lambda x: float(g_prime(x, n)), a[i], a[i + 1], xtol=1e-14)
    return SignChangeReport(n, changes, root, math.log(n) / math.e)


def ratio(bound: float, exact: float | Fraction) -> float:
    exact = float(exact)
    if exact == 0:
        return math.inf
    return bound / exact


def ck_profile(x: np.ndarray | float, n: float):
    """G_n(x) = ln((ln n / x)^(2x^2)), the log of the k-dependent factor in C_k (ln n)^(2k^2)."""
    x = np.asarray(x, dtype=float)
    return 2 * x * x * (math.log(math.log(n)) - np.log(x))


@dataclass(frozen=True)
class ArgmaxReport:
    n: int
    argmax: float
    claimed: float  # e^-1 ln n
    stationary: float  # e^-1/2 ln n, where d/dx G_n vanishes


def ck_profile_argmax(n: int) -> ArgmaxReport:
    """Numerical maximizer of G_n on (0, ln n]."""
    if n < 3:
        raise InvalidArgument("need n >= 3")
    L = math.log(n)
    res = optimize.minimize_scalar(lambda x: -float(ck_profile(x, n)), bounds=(1e-9, L), method="bounded", options={"xatol": 1e-12})
    return ArgmaxReport(n, float(res.x), L / math.e, L / math.sqrt(math.e))
