"""Factorization tables and deterministic number-theoretic counts.

Everything is derived from one smallest-prime-factor table: walking the
chain ``l -> l // spf[l]`` yields the prime factors of ``l`` in
non-decreasing order, from which squarefreeness, omega and the largest
prime factor all fall out in a single vectorized pass.
"""

from __future__ import annotations

import bisect
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, OutOfRange

N_MAX_CEILING = 10**8

CACHE_MAGIC = b"RMFSIEVE"
CACHE_VERSION = 1
_FIELDS = ("smallest_prime_factor", "is_squarefree", "omega", "largest_prime_factor", "primes")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SieveTables:
    """Immutable per-integer factorization facts for ``1..n_max``.

    Arrays are indexed directly by the integer. Index 0 is padding.
    ``largest_prime_factor[1]`` is 0 because P(1) is undefined.
    """

    n_max: int
    smallest_prime_factor: np.ndarray
    is_squarefree: np.ndarray
    omega: np.ndarray
    largest_prime_factor: np.ndarray
    primes: np.ndarray
    _sf_prefix: np.ndarray = field(repr=False)
    _prime_index: np.ndarray = field(repr=False)

    def check(self, n: int, what: str = "n") -> int:
        n = int(n)
        if n < 0 or n > self.n_max:
            raise OutOfRange(f"{what}={n} outside [0, {self.n_max}] covered by the tables")
        return n

    def prime_index(self, p: int) -> int:
        """Position of prime ``p`` in ``primes`` (0-based), -1 if not prime."""
        return int(self._prime_index[self.check(p, "p")])

    def primes_upto(self, n: int) -> np.ndarray:
        self.check(n)
        return self.primes[: self.prime_count(n)]

    def prime_count(self, n: int) -> int:
        """pi(n)."""
        self.check(n)
        return int(np.searchsorted(self.primes, n, side="right"))

    def factor(self, l: int) -> list[int]:
        """Prime factors of ``l`` with multiplicity, ascending."""
        l = self.check(l, "l")
        out = []
        while l > 1:
            p = int(self.smallest_prime_factor[l])
            out.append(p)
            l //= p
        return out

    def distinct_prime_factors(self, l: int) -> list[int]:
        return sorted(set(self.factor(l)))

    def squarefree_upto(self, n: int) -> np.ndarray:
        self.check(n)
        return np.flatnonzero(self.is_squarefree[: n + 1])

    def mobius(self, n: int) -> np.ndarray:
        """mu(l) for l in 0..n (index 0 set to 0)."""
        self.check(n)
        mu = np.where(self.omega[: n + 1] % 2 == 0, 1, -1).astype(np.int64)
        mu[~self.is_squarefree[: n + 1]] = 0
        mu[0] = 0
        return mu


def build_tables(n_max: int) -> SieveTables:
    n_max = int(n_max)
    if n_max < 2:
        raise InvalidArgument(f"n_max must be >= 2, got {n_max}")
    if n_max > N_MAX_CEILING:
        raise InvalidArgument(f"n_max={n_max} exceeds the configured ceiling {N_MAX_CEILING}")

    spf = np.zeros(n_max + 1, dtype=np.int32)
    for p in range(2, math.isqrt(n_max) + 1):
        if spf[p] == 0:
            view = spf[p * p :: p]
            view[view == 0] = p
    idx = np.arange(n_max + 1, dtype=np.int32)
    prime_mask = spf == 0
    prime_mask[:2] = False
    spf[prime_mask] = idx[prime_mask]
    primes = np.flatnonzero(prime_mask).astype(np.int64)

    sqf = np.ones(n_max + 1, dtype=bool)
    sqf[0] = False
    omega = np.zeros(n_max + 1, dtype=np.int8)
    lpf = np.zeros(n_max + 1, dtype=np.int32)

    # walk every spf chain simultaneously; ``act`` holds the still-composite indices
    act = np.arange(2, n_max + 1, dtype=np.int64)
    cur = act.copy()
    last = np.zeros_like(act)
    while act.size:
        p = spf[cur].astype(np.int64)
        repeat = p == last
        omega[act] += (~repeat).astype(np.int8)
        sqf[act[repeat]] = False
        lpf[act] = p
        last = p
        cur = cur // p
        keep = cur > 1
        act, cur, last = act[keep], cur[keep], last[keep]

    sf_prefix = np.cumsum(sqf, dtype=np.int64)
    pidx = np.full(n_max + 1, -1, dtype=np.int64)
    pidx[primes] = np.arange(primes.size)

    return SieveTables(
        n_max=n_max,
        smallest_prime_factor=_frozen(spf),
        is_squarefree=_frozen(sqf),
        omega=_frozen(omega),
        largest_prime_factor=_frozen(lpf),
        primes=_frozen(primes),
        _sf_prefix=_frozen(sf_prefix),
        _prime_index=_frozen(pidx),
    )


def squarefree_count(t: SieveTables, n: int) -> int:
    """Q(n), the number of squarefree integers in [1, n]."""
    return int(t._sf_prefix[t.check(n)])


def smooth_count(t: SieveTables, x: int, y: int) -> int:
    """psi(x, y): integers m <= x all of whose prime factors are <= y (m = 1 included)."""
    x = t.check(x, "x")
    if y < 2:
        raise InvalidArgument(f"smoothness bound y must be >= 2, got {y}")
    if x == 0:
        return 0
    return 1 + int(np.count_nonzero(t.largest_prime_factor[2 : x + 1] <= y))


def tail_prime_count(t: SieveTables, n: int) -> int:
    """s_n = #{p prime : n/2 < p <= n}."""
    n = t.check(n)
    return t.prime_count(n) - t.prime_count(n // 2)


@lru_cache(maxsize=16)
def _rho_grid(step: float, blocks: int) -> tuple[np.ndarray, np.ndarray]:
    # Trapezoid on u*rho(u) = int_{u-1}^{u} rho(s) ds over the grid u_i = 1 + i*step.
    # Every term is positive, so the tiny values at large u keep full relative accuracy.
    h = step
    m = int(math.ceil(blocks / h))
    resum = max(1, round(1.0 / h))
    rho = [1.0] * (m + 1)
    left = 0  # first grid index with u_left >= u_i - 1
    inner = 0.0  # sum of rho_j for left < j < i
    for i in range(1, m + 1):
        ui = 1.0 + i * h
        a = ui - 1.0
        if a <= 1.0:
            new_left, partial = 0, 1.0 - a  # rho == 1 on [a, 1]
        else:
            new_left = max(0, math.ceil((a - 1.0) / h - 1e-9))
            d = max(0.0, 1.0 + new_left * h - a)
            if d > 0.0:
                w = 1.0 - d / h
                ra = (1.0 - w) * rho[new_left - 1] + w * rho[new_left]
                partial = 0.5 * d * (ra + rho[new_left])
            else:
                partial = 0.0
        if i - 1 > left:
            inner += rho[i - 1]
        for j in range(left + 1, min(new_left, i - 1) + 1):
            inner -= rho[j]
        left = new_left
        if i % resum == 0:
            inner = math.fsum(rho[left + 1 : i])
        rho[i] = (partial + 0.5 * h * rho[left] + h * inner) / (ui - 0.5 * h)
    u = 1.0 + h * np.arange(m + 1)
    r = np.array(rho)
    u.setflags(write=False)
    r.setflags(write=False)
    return u, r


def dickman_rho(u: float, step: float = 1e-4) -> float:
    """Dickman's function by fixed-step trapezoidal integration of the delay equation.

    The delay equation u rho'(u) = -rho(u - 1) is integrated in its averaged form
    u rho(u) = int_{u-1}^{u} rho(s) ds, with the left end of the window linearly
    interpolated from stored history when ``step`` does not divide 1. Values
    between grid points are linearly interpolated.
    """
    if not step > 0:
        raise InvalidArgument(f"step must be positive, got {step}")
    if u < 0 or math.isnan(u):
        raise InvalidArgument(f"u must be >= 0, got {u}")
    if u <= 1.0:
        return 1.0
    grid_u, grid_rho = _rho_grid(float(step), int(math.ceil(u - 1.0)) + 1)
    return float(np.interp(u, grid_u, grid_rho))


def dickman_rho_array(us, step: float = 1e-4) -> np.ndarray:
    us = np.asarray(us, dtype=float)
    if np.any(us < 0):
        raise InvalidArgument("u must be >= 0")
    top = float(us.max(initial=1.0))
    if top <= 1.0:
        return np.ones_like(us)
    grid_u, grid_rho = _rho_grid(float(step), int(math.ceil(top - 1.0)) + 1)
    return np.where(us <= 1.0, 1.0, np.interp(us, grid_u, grid_rho))


def dickman_rho_closed_form(u: float) -> float:
    """Exact rho on [0, 2]: 1 on [0, 1], 1 - ln u on [1, 2]."""
    if u < 0 or u > 2:
        raise InvalidArgument("closed form only covers [0, 2]")
    return 1.0 if u <= 1 else 1.0 - math.log(u)


# -- binary cache ---------------------------------------------------------------
# header: magic(8) version(u32) nfields(u32) n_max(u64), then per field
# name(24s) dtype(8s) offset(u64) length(u64); arrays follow, little-endian

_HEAD = struct.Struct("<8sIIQ")
_ENTRY = struct.Struct("<24s8sQQ")


def save_tables(t: SieveTables, path: str | Path) -> None:
    arrays = [np.ascontiguousarray(getattr(t, name)) for name in _FIELDS]
    arrays = [a.astype(a.dtype.newbyteorder("<")) for a in arrays]
    offset = _HEAD.size + _ENTRY.size * len(_FIELDS)
    entries = []
    for name, a in zip(_FIELDS, arrays):
        entries.append(_ENTRY.pack(name.encode(), a.dtype.str.encode(), offset, a.size))
        offset += a.nbytes
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(CACHE_MAGIC, CACHE_VERSION, len(_FIELDS), t.n_max))
        for e in entries:
            fh.write(e)
        for a in arrays:
            fh.write(a.tobytes())


def load_tables(path: str | Path) -> SieveTables:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise InvalidArgument(f"{path}: truncated sieve cache")
    magic, version, nfields, n_max = _HEAD.unpack_from(raw, 0)
    if magic != CACHE_MAGIC:
        raise InvalidArgument(f"{path}: not a sieve cache file")
    if version != CACHE_VERSION:
        raise InvalidArgument(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    fields = {}
    for i in range(nfields):
        name, dt, off, length = _ENTRY.unpack_from(raw, _HEAD.size + i * _ENTRY.size)
        name = name.rstrip(b"\0").decode()
        dtype = np.dtype(dt.rstrip(b"\0").decode())
        end = off + length * dtype.itemsize
        if end > len(raw):
            raise InvalidArgument(f"{path}: field {name} runs past end of file")
        fields[name] = np.frombuffer(raw, dtype=dtype, count=length, offset=off).astype(dtype.newbyteorder("="))
    missing = set(_FIELDS) - set(fields)
    if missing:
        raise InvalidArgument(f"{path}: missing fields {sorted(missing)}")
    primes = fields["primes"].astype(np.int64)
    sqf = fields["is_squarefree"].astype(bool)
    pidx = np.full(n_max + 1, -1, dtype=np.int64)
    pidx[primes] = np.arange(primes.size)
    return SieveTables(
        n_max=int(n_max),
        smallest_prime_factor=_frozen(fields["smallest_prime_factor"].astype(np.int32)),
        is_squarefree=_frozen(sqf),
        omega=_frozen(fields["omega"].astype(np.int8)),
        largest_prime_factor=_frozen(fields["largest_prime_factor"].astype(np.int32)),
        primes=_frozen(primes),
        _sf_prefix=_frozen(np.cumsum(sqf, dtype=np.int64)),
        _prime_index=_frozen(pidx),
    )


def load_or_build(n_max: int, cache: str | Path | None = None) -> SieveTables:
    """Load tables from ``cache`` when it covers ``n_max``, otherwise build (and write) them."""
    if cache is not None and Path(cache).exists():
        t = load_tables(cache)
        if t.n_max >= n_max:
            return t
    t = build_tables(n_max)
    if cache is not None:
        save_tables(t, cache)
    return t


def pnt_tail_estimate(n: int) -> float:
    """Prime number theorem heuristic n / (2 ln n) for the count of primes in (n/2, n]."""
    return n / (2.0 * math.log(n))


def primes_between(t: SieveTables, lo: float, hi: float) -> list[int]:
    """Primes p with lo < p <= hi."""
    ps = t.primes
    i = bisect.bisect_right(ps, lo)
    j = bisect.bisect_right(ps, hi)
    return [int(p) for p in ps[i:j]]
