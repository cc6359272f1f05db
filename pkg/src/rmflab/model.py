"""The random model (X_p) and everything computed on a single realization.

Randomness is counter based: the draw for prime index ``i`` on path
``path_id`` is output ``i`` of a Philox4x64 stream keyed by
``(seed, path_id)``, so any path or any single draw can be regenerated
without replaying earlier ones.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import BudgetExceeded, InvalidArgument, InvalidSpec, OutOfRange, Unsupported
from .parallel import chunk_ranges, map_chunks
from .sieve import SieveTables, squarefree_count

MASK64 = (1 << 64) - 1

RADEMACHER = "rademacher"
SYMMETRIC_FINITE = "symmetric-finite"
MOBIUS = "mobius-deterministic"
FAMILIES = (RADEMACHER, SYMMETRIC_FINITE, MOBIUS)

Support = tuple[tuple[Fraction, Fraction], ...]

_RADEMACHER_SUPPORT: Support = ((Fraction(-1), Fraction(1, 2)), (Fraction(1), Fraction(1, 2)))


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def _normalize_support(pairs: Iterable) -> Support:
    merged: dict[Fraction, Fraction] = {}
    for v, q in pairs:
        v, q = _as_fraction(v), _as_fraction(q)
        if q <= 0:
            raise InvalidSpec(f"probability for value {v} must be positive, got {q}")
        merged[v] = merged.get(v, Fraction(0)) + q
    if not merged:
        raise InvalidSpec("empty support")
    if sum(merged.values()) != 1:
        raise InvalidSpec(f"probabilities sum to {sum(merged.values())}, not 1")
    for v, q in merged.items():
        if merged.get(-v) != q:
            raise InvalidSpec(f"support is not symmetric: value {v} has probability {q}, {-v} has {merged.get(-v)}")
    if Fraction(0) in merged:
        raise InvalidSpec("value 0 in the support makes ess-inf |X_p| = 0")
    return tuple(sorted(merged.items()))


def parse_support(text: str) -> Support:
    """Parse ``"v:q,v:q,..."`` with rational or decimal entries, e.g. ``"2:1/4,-2:1/4,1:1/4,-1:1/4"``."""
    pairs = []
    for chunk in text.replace(";", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            v, q = chunk.split(":")
            pairs.append((Fraction(v.strip()), Fraction(q.strip())))
        except ValueError:
            raise InvalidSpec(f"cannot parse support entry {chunk!r}; expected value:probability") from None
    return _normalize_support(pairs)


@dataclass(frozen=True, eq=True)
class ModelSpec:
    """Distribution family for the X_p, with optional per-prime overrides."""

    family: str = RADEMACHER
    support: Support = _RADEMACHER_SUPPORT
    overrides: Mapping[int, Support] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == SYMMETRIC_FINITE:
            object.__setattr__(self, "support", _normalize_support(self.support))
            object.__setattr__(self, "overrides", {int(p): _normalize_support(s) for p, s in self.overrides.items()})
        elif self.overrides:
            raise InvalidSpec(f"per-prime overrides require family {SYMMETRIC_FINITE!r}")

    @classmethod
    def rademacher(cls) -> "ModelSpec":
        return cls(RADEMACHER)

    @classmethod
    def mobius_deterministic(cls) -> "ModelSpec":
        """X_p = -1 for every p, so theta is the Moebius function."""
        return cls(MOBIUS, support=((Fraction(-1), Fraction(1)),))

    @classmethod
    def symmetric_finite(cls, support, overrides: Mapping[int, Iterable] | None = None) -> "ModelSpec":
        return cls(SYMMETRIC_FINITE, support=tuple(support), overrides=dict(overrides or {}))

    @property
    def is_random(self) -> bool:
        return self.family != MOBIUS

    @property
    def is_sign_valued(self) -> bool:
        # only these families use the packed sign-bit draws
        return self.family in (RADEMACHER, MOBIUS)

    def support_for(self, p: int) -> Support:
        return self.overrides.get(int(p), self.support)

    def _all_supports(self) -> list[Support]:
        return [self.support, *self.overrides.values()]

    @property
    def M(self) -> Fraction:
        """sup_p ||X_p||_inf."""
        return max(abs(v) for s in self._all_supports() for v, _ in s)

    @property
    def c0(self) -> Fraction:
        """inf_p ess-inf |X_p|."""
        return min(abs(v) for s in self._all_supports() for v, _ in s)

    def second_moment(self, p: int) -> Fraction:
        return sum((q * v * v for v, q in self.support_for(p)), Fraction(0))


def load_model_config(path: str | Path) -> tuple[ModelSpec, int | None]:
    """Read a ``key = value`` model file.

    Keys: ``family``, ``support``, ``seed`` and ``override.<p>`` (a support
    string for prime p). Blank lines and ``#`` comments are ignored.
    """
    conf = parse_key_values(Path(path).read_text())
    family = conf.pop("family", RADEMACHER)
    seed = int(conf.pop("seed")) if "seed" in conf else None
    support = conf.pop("support", None)
    overrides = {}
    for key in list(conf):
        if key.startswith("override."):
            overrides[int(key.split(".", 1)[1])] = parse_support(conf.pop(key))
    if family == SYMMETRIC_FINITE:
        if support is None:
            raise InvalidSpec(f"{path}: family {SYMMETRIC_FINITE} needs a support line")
        return ModelSpec.symmetric_finite(parse_support(support), overrides), seed
    if family == MOBIUS:
        return ModelSpec.mobius_deterministic(), seed
    if family == RADEMACHER:
        return ModelSpec.rademacher(), seed
    raise InvalidSpec(f"{path}: unknown family {family!r}")


def parse_key_values(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"line {lineno}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# -- counter-based draws --------------------------------------------------------


def _philox(seed: int, path_id: int) -> np.random.Philox:
    return np.random.Philox(key=(int(seed) & MASK64) | ((int(path_id) & MASK64) << 64))


def raw_draws(seed: int, path_id: int, count: int) -> np.ndarray:
    """The first ``count`` 64-bit outputs of the (seed, path_id) stream."""
    return _philox(seed, path_id).random_raw(count)


def raw_draw_at(seed: int, path_id: int, i: int) -> int:
    """Output ``i`` of the (seed, path_id) stream, computed without generating 0..i-1."""
    bg = _philox(seed, path_id)
    bg.advance(i // 4)
    return int(bg.random_raw(4)[i % 4])


def rademacher_sign_at(seed: int, path_id: int, i: int) -> int:
    """Sign drawn for prime index ``i``: bit ``i % 64`` of output ``i // 64`` (0 -> +1)."""
    word = raw_draw_at(seed, path_id, i // 64)
    return -1 if (word >> (i % 64)) & 1 else 1


def _uniforms(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _inverse_cdf(support: Support, u: np.ndarray) -> np.ndarray:
    vals = np.array([float(v) for v, _ in support])
    cum = np.cumsum([float(q) for _, q in support])
    cum[-1] = 1.0
    return vals[np.minimum(np.searchsorted(cum, u, side="right"), len(vals) - 1)]


def sample_values(spec: ModelSpec, primes: np.ndarray, seed: int, path_id: int) -> np.ndarray:
    """Realized X_p for the given primes (which must be the first len(primes) primes)."""
    m = len(primes)
    if spec.family == MOBIUS:
        return -np.ones(m)
    if spec.family == RADEMACHER:
        raw = raw_draws(seed, path_id, (m + 63) // 64)
        out = np.empty(m, dtype=np.int8)
        return _kernels.unpack_sign_bits(raw, m, out).astype(np.float64)
    u = _uniforms(raw_draws(seed, path_id, m))
    vals = _inverse_cdf(spec.support, u)
    for p, supp in spec.overrides.items():
        i = int(np.searchsorted(primes, p))
        if i < m and primes[i] == p:
            vals[i] = _inverse_cdf(supp, u[i : i + 1])[0]
    return vals


def sample_signs_batch(spec: ModelSpec, m: int, seed: int, lo: int, hi: int) -> np.ndarray:
    """int8 sign matrix for path ids lo..hi-1 (Rademacher or Moebius families)."""
    out = np.empty((hi - lo, m), dtype=np.int8)
    if spec.family == MOBIUS:
        out[:] = -1
        return out
    words = (m + 63) // 64
    for r, pid in enumerate(range(lo, hi)):
        _kernels.unpack_sign_bits(raw_draws(seed, pid, words), m, out[r])
    return out


@dataclass(frozen=True, eq=False)
class SamplePath:
    spec: ModelSpec
    seed: int
    path_id: int
    primes: np.ndarray
    values: np.ndarray

    def value(self, p: int) -> float:
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self.primes) or self.primes[i] != p:
            raise OutOfRange(f"{p} is not a prime covered by this path")
        return float(self.values[i])

    def as_dict(self) -> dict[int, float]:
        return {int(p): float(v) for p, v in zip(self.primes, self.values)}


def sample_path(spec: ModelSpec, t: SieveTables, seed: int, path_id: int, n: int | None = None) -> SamplePath:
    """Draw X_p for every prime up to ``n`` (default: the whole table)."""
    primes = t.primes if n is None else t.primes_upto(n)
    vals = sample_values(spec, primes, seed, path_id)
    vals.setflags(write=False)
    return SamplePath(spec, int(seed), int(path_id), primes, vals)


def fixed_path(t: SieveTables, value: float, n: int | None = None) -> SamplePath:
    """Degenerate path with X_p = value for all p (value=-1 gives Moebius)."""
    primes = t.primes if n is None else t.primes_upto(n)
    vals = np.full(len(primes), float(value))
    vals.setflags(write=False)
    spec = ModelSpec.mobius_deterministic() if value == -1 else ModelSpec.rademacher()
    return SamplePath(spec, 0, 0, primes, vals)


def path_to_csv(path: SamplePath, dest=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["prime", "value"])
    for p, v in zip(path.primes, path.values):
        w.writerow([int(p), _fmt_value(v)])
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text)
    return text


def _fmt_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# -- squarefree layout ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SquarefreeLayout:
    """Squarefree l <= n in increasing order with the recursion theta(l) = theta(l/spf) * X_spf."""

    n: int
    values: np.ndarray
    parent: np.ndarray
    pidx: np.ndarray

    def record_positions(self, t: SieveTables, n_grid: Sequence[int]) -> np.ndarray:
        return np.array([squarefree_count(t, k) - 1 for k in n_grid], dtype=np.int64)


_layouts: "weakref.WeakKeyDictionary[SieveTables, dict[int, SquarefreeLayout]]" = weakref.WeakKeyDictionary()


def squarefree_layout(t: SieveTables, n: int) -> SquarefreeLayout:
    n = t.check(n)
    cache = _layouts.setdefault(t, {})
    if n not in cache:
        vals = t.squarefree_upto(n).astype(np.int64)
        spf = t.smallest_prime_factor[vals].astype(np.int64)
        spf[0] = 1
        parent = t._sf_prefix[vals // spf] - 1
        parent[0] = -1
        pidx = t._prime_index[spf]
        pidx[0] = 0
        cache[n] = SquarefreeLayout(n, vals, parent.astype(np.int64), pidx.astype(np.int64))
    return cache[n]


def _check_grid(t: SieveTables, n_grid: Sequence[int]) -> list[int]:
    grid = [int(k) for k in n_grid]
    if not grid:
        raise InvalidArgument("empty n grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidArgument(f"n grid must be sorted ascending, got {grid}")
    if grid[0] < 1:
        raise InvalidArgument("n grid entries must be >= 1")
    t.check(grid[-1])
    return grid


# -- single-path quantities --------------------------------------------------------


def theta(path: SamplePath, t: SieveTables, l: int) -> float:
    """theta_l: product of X_p over p | l when l is squarefree, else 0; theta_1 = 1."""
    l = t.check(l, "l")
    if l < 1:
        raise OutOfRange("theta is defined for l >= 1")
    if not t.is_squarefree[l]:
        return 0.0
    out = 1.0
    for p in t.distinct_prime_factors(l):
        out *= path.value(p)
    return out


def theta_array(path: SamplePath, t: SieveTables, n: int) -> np.ndarray:
    """theta_l for l = 0..n (entry 0 unused, 0.0)."""
    lay = squarefree_layout(t, n)
    th = _kernels.theta_values(_path_values(path, t, n), lay.parent, lay.pidx)
    out = np.zeros(n + 1)
    out[lay.values] = th
    return out


def _path_values(path: SamplePath, t: SieveTables, n: int) -> np.ndarray:
    m = t.prime_count(n)
    if len(path.values) < m:
        raise OutOfRange(f"path covers {len(path.values)} primes, n={n} needs {m}")
    return np.ascontiguousarray(path.values[:m], dtype=np.float64)


def partial_sums(path: SamplePath, t: SieveTables, n_grid: Sequence[int]) -> list[float]:
    """S_n for each n in the sorted grid, in one streaming pass."""
    grid = _check_grid(t, n_grid)
    lay = squarefree_layout(t, grid[-1])
    x = _path_values(path, t, grid[-1])[None, :]
    out = np.empty((1, len(grid)))
    _kernels.partial_sums_float(x, lay.parent, lay.pidx, lay.record_positions(t, grid), out)
    return [float(v) for v in out[0]]


def martingale_decomposition(path: SamplePath, t: SieveTables, n: int) -> tuple[float, dict[int, float]]:
    """(theta_1 cell, {p: M_p(n)}) with M_p(n) the sum of theta_l over l <= n with P(l) = p.

    S_n equals the cell plus the sum of all M_p(n) exactly.
    """
    n = t.check(n)
    th = theta_array(path, t, n)
    ps = t.primes_upto(n)
    if n < 2:
        return 1.0, {}
    lpf = t.largest_prime_factor[2 : n + 1]
    sums = np.bincount(lpf, weights=th[2 : n + 1], minlength=n + 1)
    return float(th[1]), {int(p): float(sums[p]) for p in ps}


def delta_split(t: SieveTables, n: int, reading: str = "cube-of-log") -> tuple[list[int], list[int]]:
    """Split primes p <= n into {p : p < (ln(n/p))^3} and its complement.

    ``reading="log-of-cube"`` uses the other parse of the defining inequality,
    p < ln((n/p)^3).
    """
    ps = [int(p) for p in t.primes_upto(n)]
    if reading == "cube-of-log":
        inside = [p for p in ps if p < math.log(n / p) ** 3]
    elif reading == "log-of-cube":
        inside = [p for p in ps if p < 3 * math.log(n / p)]
    else:
        raise InvalidArgument(f"unknown reading {reading!r}")
    s = set(inside)
    return inside, [p for p in ps if p not in s]


# -- exact sup norms by enumeration -------------------------------------------------


def _block_terms(t: SieveTables, n: int, block: Iterable[int]) -> list[list[int]]:
    block = set(int(p) for p in block)
    terms = []
    for l in t.squarefree_upto(n):
        l = int(l)
        if l >= 2 and int(t.largest_prime_factor[l]) in block:
            terms.append(t.distinct_prime_factors(l))
    return terms


def sup_norm_block(spec: ModelSpec, t: SieveTables, n: int, block: Iterable[int], budget: int = 20) -> float:
    """ess-sup of |sum of theta_l over l <= n with P(l) in block|, by exhaustive enumeration.

    Only primes that divide some term enter; ``budget`` caps their number and
    the number of joint support points at 2**budget.
    """
    n = t.check(n)
    terms = _block_terms(t, n, block)
    if not terms:
        return 0.0
    variables = sorted({p for tm in terms for p in tm})
    supports = [np.array([float(v) for v, _ in spec.support_for(p)]) for p in variables]
    combos = math.prod(len(s) for s in supports)
    if len(variables) > budget or combos > 2**budget:
        raise BudgetExceeded(
            f"sup norm needs {len(variables)} primes ({combos} joint values), budget is {budget}; "
            "use the term-count x M_n bound from the bounds module instead"
        )
    col = {p: i for i, p in enumerate(variables)}
    term_cols = [[col[p] for p in tm] for tm in terms]
    radix = np.array([len(s) for s in supports], dtype=np.int64)
    best = 0.0
    for lo, hi in chunk_ranges(combos, 1 << 16):
        idx = np.arange(lo, hi, dtype=np.int64)
        X = np.empty((hi - lo, len(variables)))
        for i, s in enumerate(supports):
            X[:, i] = s[idx % radix[i]]
            idx //= radix[i]
        g = np.zeros(hi - lo)
        for cols in term_cols:
            g += np.prod(X[:, cols], axis=1)
        best = max(best, float(np.abs(g).max()))
    return best


def sup_norm_Mp(spec: ModelSpec, t: SieveTables, n: int, p: int, budget: int = 20) -> float:
    """Exact ||M_p(n)||_inf."""
    if t.prime_index(p) < 0 or p > n:
        raise InvalidArgument(f"{p} is not a prime <= {n}")
    return sup_norm_block(spec, t, n, [p], budget)


def mp_term_count(t: SieveTables, n: int, p: int) -> int:
    """Number of summands of M_p(n): squarefree p*k <= n with every prime of k below p."""
    return len(_block_terms(t, n, [p]))


def conditional_means_Mp(spec: ModelSpec, t: SieveTables, n: int, p: int) -> list[Fraction]:
    """E[M_p(n) | X_q, q < p] for every assignment of the earlier primes that enter M_p(n).

    Computed in exact rationals; each entry must be zero.
    """
    if not spec.is_random:
        raise Unsupported("conditional means need a random (symmetric) model")
    terms = _block_terms(t, n, [p])
    cofactors = [[q for q in tm if q != p] for tm in terms]
    earlier = sorted({q for c in cofactors for q in c})
    supp_p = spec.support_for(p)
    means = []
    for assignment in itertools.product(*[[v for v, _ in spec.support_for(q)] for q in earlier]):
        val = dict(zip(earlier, assignment))
        g = sum((math.prod((val[q] for q in c), start=Fraction(1)) for c in cofactors), Fraction(0))
        means.append(sum((prob * v * g for v, prob in supp_p), Fraction(0)))
    return means


# -- batched simulation -------------------------------------------------------------

SIM_CHUNK = 2048


def simulate_partial_sums(
    spec: ModelSpec,
    t: SieveTables,
    n_grid: Sequence[int],
    paths: int,
    seed: int,
    threads: int | None = None,
    first_path: int = 0,
) -> np.ndarray:
    """S_n on the grid for path ids first_path .. first_path+paths-1, shape (paths, len(grid)).

    Rows depend only on (spec, seed, path_id), so the result is identical for
    any thread count.
    """
    grid = _check_grid(t, n_grid)
    if paths < 1:
        raise InvalidArgument("paths must be >= 1")
    lay = squarefree_layout(t, grid[-1])
    record = lay.record_positions(t, grid)
    m = t.prime_count(grid[-1])
    primes = t.primes_upto(grid[-1])
    out = np.empty((paths, len(grid)))

    def run(lo: int, hi: int) -> None:
        if spec.is_sign_valued:
            signs = sample_signs_batch(spec, m, seed, first_path + lo, first_path + hi)
            buf = np.empty((hi - lo, len(grid)), dtype=np.int64)
            _kernels.partial_sums_sign(signs, lay.parent, lay.pidx, record, buf)
            out[lo:hi] = buf
        else:
            vals = np.stack([sample_values(spec, primes, seed, pid) for pid in range(first_path + lo, first_path + hi)])
            _kernels.partial_sums_float(vals, lay.parent, lay.pidx, record, out[lo:hi])

    map_chunks(run, chunk_ranges(paths, SIM_CHUNK), threads)
    return out
