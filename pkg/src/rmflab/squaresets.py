"""Subsets of squarefree integers whose product is a perfect square.

A set of squarefree integers multiplies to a square exactly when the XOR of
their mod-2 prime-exponent vectors vanishes, so the sets counted here are the
codewords of the binary code ker(A), A being the (primes x squarefree)
incidence matrix. Three independent counts are provided: walking the kernel
span, the MacWilliams transform of the row-space (dual) weights, and brute
force over all subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import BudgetExceeded, InternalConsistencyError, InvalidArgument
from .parallel import chunk_ranges, map_chunks
from .sieve import SieveTables, squarefree_count

KERNEL = "kernel-enum"
MACWILLIAMS = "macwilliams"
BRUTE = "brute-force"


@dataclass(frozen=True)
class ExponentMatrix:
    """Columns are squarefree l <= n; bit r of a column is set when primes[r] divides l.

    Bit vectors are Python ints (bit i = row i for columns, bit j = column j
    for rows and kernel vectors).
    """

    n: int
    squarefree_list: tuple[int, ...]
    primes: tuple[int, ...]
    columns: tuple[int, ...]

    @property
    def s(self) -> int:
        return len(self.squarefree_list)

    @property
    def prime_index(self) -> dict[int, int]:
        return {p: i for i, p in enumerate(self.primes)}

    def rows(self) -> list[int]:
        rows = [0] * len(self.primes)
        for j, c in enumerate(self.columns):
            while c:
                low = c & -c
                rows[low.bit_length() - 1] |= 1 << j
                c ^= low
        return rows

    def members(self, vector: int) -> list[int]:
        """Squarefree integers selected by a bit vector over columns."""
        return [self.squarefree_list[j] for j in range(self.s) if (vector >> j) & 1]


@dataclass(frozen=True)
class WeightDistribution:
    n: int
    counts: dict[int, int]
    nullity: int
    rank: int
    method: str
    weight_cap: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", {w: c for w, c in sorted(self.counts.items()) if c})

    def B(self, k: int) -> int:
        """B_{2k,n}: bad sets of size 2k."""
        if self.weight_cap is not None and 2 * k > self.weight_cap:
            raise InvalidArgument(f"weight 2k={2 * k} is above the cap {self.weight_cap} of this distribution")
        return self.counts.get(2 * k, 0)

    def same_counts(self, other: "WeightDistribution") -> bool:
        return self.n == other.n and self.counts == other.counts


def build_exponent_matrix(t: SieveTables, n: int) -> ExponentMatrix:
    n = t.check(n)
    sf = [int(l) for l in t.squarefree_upto(n)]
    primes = tuple(int(p) for p in t.primes_upto(n))
    cols = []
    for l in sf:
        c = 0
        for p in t.distinct_prime_factors(l):
            c |= 1 << t.prime_index(p)
        cols.append(c)
    return ExponentMatrix(n, tuple(sf), primes, tuple(cols))


def rank_and_kernel(m: ExponentMatrix) -> tuple[int, int, list[int]]:
    """GF(2) elimination over the columns.

    Each column is reduced against the pivots found so far while tracking
    which original columns were combined; a column that reduces to zero
    yields a kernel vector (bit j = column j).
    """
    pivots: dict[int, tuple[int, int]] = {}  # leading bit -> (reduced vector, combination)
    kernel = []
    for j, col in enumerate(m.columns):
        v, comb = col, 1 << j
        while v:
            lead = v.bit_length() - 1
            if lead not in pivots:
                pivots[lead] = (v, comb)
                break
            pv, pc = pivots[lead]
            v ^= pv
            comb ^= pc
        else:
            kernel.append(comb)
    return len(pivots), len(kernel), kernel


def _check_kernel(m: ExponentMatrix, basis: list[int]) -> None:
    for v in basis:
        acc = 0
        for j, c in enumerate(m.columns):
            if (v >> j) & 1:
                acc ^= c
        if acc:
            raise InternalConsistencyError("kernel basis vector does not XOR to zero")


def _to_words(vectors: list[int], nbits: int) -> np.ndarray:
    words = max(1, (nbits + 63) // 64)
    out = np.zeros((len(vectors), words), dtype=np.uint64)
    mask = (1 << 64) - 1
    for i, v in enumerate(vectors):
        for k in range(words):
            out[i, k] = (v >> (64 * k)) & mask
    return out


def _span(gens: np.ndarray) -> np.ndarray:
    """All 2^len(gens) XOR combinations of the generator rows, in Gray-code order."""
    span = np.zeros((1, gens.shape[1]), dtype=np.uint64)
    for g in gens:
        # reflected doubling: the appended half is the current half reversed, XOR g
        span = np.concatenate([span, span[::-1] ^ g])
    return span


def span_weight_tally(gens: list[int], nbits: int, cap: int | None = None, threads: int | None = None) -> list[int]:
    """Hamming-weight tally of the GF(2) span of ``gens`` (assumed independent).

    The span is split into two halves that are enumerated separately and
    combined pairwise; chunks of the left half are tallied independently and
    summed in order.
    """
    cap = nbits if cap is None else min(cap, nbits)
    if not gens:
        return [1] + [0] * cap
    w = _to_words(gens, nbits)
    half = len(gens) // 2
    left = _span(w[:half])
    right = _span(w[half:])

    def work(lo: int, hi: int) -> np.ndarray:
        tally = np.zeros(cap + 1, dtype=np.int64)
        return _kernels.xor_popcount_tally(left[lo:hi], right, tally, cap)

    parts = map_chunks(work, chunk_ranges(left.shape[0], 256), threads)
    total = [0] * (cap + 1)
    for part in parts:
        for i, c in enumerate(part):
            total[i] += int(c)
    return total


def badset_counts_kernel(m: ExponentMatrix, weight_cap: int | None = None, budget: int = 28, threads: int | None = None) -> WeightDistribution:
    """Weight distribution of ker(A) by enumerating all 2^nullity kernel vectors."""
    rank, nullity, basis = rank_and_kernel(m)
    if nullity > budget:
        raise BudgetExceeded(
            f"kernel enumeration needs 2^{nullity} vectors (budget 2^{budget}); "
            f"the MacWilliams route needs only 2^{rank} dual vectors"
        )
    _check_kernel(m, basis)
    tally = span_weight_tally(basis, m.s, weight_cap, threads)
    return WeightDistribution(m.n, dict(enumerate(tally)), nullity, rank, KERNEL, weight_cap)


def krawtchouk_table(s: int, w: int) -> list[int]:
    """K_j(w; s) for j = 0..s, via (j+1) K_{j+1} = (s - 2w) K_j - (s - j + 1) K_{j-1}."""
    K = [1]
    if s >= 1:
        K.append(s - 2 * w)
    for j in range(1, s):
        num = (s - 2 * w) * K[j] - (s - j + 1) * K[j - 1]
        q, r = divmod(num, j + 1)
        if r:
            raise InternalConsistencyError(f"Krawtchouk recurrence not integral at j={j}, w={w}, s={s}")
        K.append(q)
    return K


def macwilliams_transform(dual_counts: list[int] | dict[int, int], s: int, dual_dim: int) -> dict[int, int]:
    """Primal weight counts from the dual code's counts: A_j = 2^-dual_dim sum_w B_w K_j(w; s)."""
    items = dual_counts.items() if isinstance(dual_counts, dict) else enumerate(dual_counts)
    acc = [0] * (s + 1)
    for w, bw in items:
        if bw:
            for j, k in enumerate(krawtchouk_table(s, w)):
                acc[j] += bw * k
    out = {}
    denom = 1 << dual_dim
    for j, a in enumerate(acc):
        q, r = divmod(a, denom)
        if r or q < 0:
            raise InternalConsistencyError(f"MacWilliams transform gave non-integral count at weight {j}")
        out[j] = q
    return out


def badset_counts_macwilliams(m: ExponentMatrix, budget: int = 26, threads: int | None = None) -> WeightDistribution:
    """Weight distribution of ker(A) from the 2^rank row-space weights."""
    rows = m.rows()
    # independent generators for the row space
    pivots: dict[int, int] = {}
    for r in rows:
        v = r
        while v:
            lead = v.bit_length() - 1
            if lead not in pivots:
                pivots[lead] = v
                break
            v ^= pivots[lead]
    gens = list(pivots.values())
    rank = len(gens)
    if rank > budget:
        raise BudgetExceeded(f"dual enumeration needs 2^{rank} vectors (budget 2^{budget})")
    dual = span_weight_tally(gens, m.s, None, threads)
    counts = macwilliams_transform(dual, m.s, rank)
    return WeightDistribution(m.n, counts, m.s - rank, rank, MACWILLIAMS)


def brute_force_badsets(t: SieveTables, n: int, max_size: int | None = None, limit: int = 20) -> WeightDistribution:
    """Tally every subset of the squarefree integers <= n whose exponent vectors XOR to zero."""
    m = build_exponent_matrix(t, n)
    if m.s > limit:
        raise BudgetExceeded(f"brute force over 2^{m.s} subsets exceeds 2^{limit}")
    cols = np.array(m.columns, dtype=np.uint64)
    xor = np.zeros(1, dtype=np.uint64)
    for c in cols:
        xor = np.concatenate([xor, xor ^ c])  # index bit j <-> column j in the subset
    size = np.bitwise_count(np.arange(xor.size, dtype=np.uint64))
    zero = xor == 0
    if max_size is not None:
        zero &= size <= max_size
    counts = np.bincount(size[zero], minlength=m.s + 1)
    rank, nullity, _ = rank_and_kernel(m)
    return WeightDistribution(n, {w: int(c) for w, c in enumerate(counts)}, nullity, rank, BRUTE, max_size)


def is_bad_set(t: SieveTables, A) -> bool:
    """True iff A is an even-size (>= 2) set of squarefree integers with square product."""
    A = set(int(a) for a in A)
    if len(A) < 2 or len(A) % 2:
        return False
    acc = 0
    for a in A:
        t.check(a, "element")
        if a < 1 or not t.is_squarefree[a]:
            return False
        for p in t.distinct_prime_factors(a):
            acc ^= 1 << t.prime_index(p)
    return acc == 0


def badset_counts(t: SieveTables, n: int, method: str = "auto", threads: int | None = None) -> WeightDistribution:
    m = build_exponent_matrix(t, n)
    if method == "auto":
        rank, nullity, _ = rank_and_kernel(m)
        method = KERNEL if nullity <= rank else MACWILLIAMS
    if method in (KERNEL, "kernel"):
        return badset_counts_kernel(m, threads=threads)
    if method == MACWILLIAMS:
        return badset_counts_macwilliams(m, threads=threads)
    if method in (BRUTE, "brute"):
        return brute_force_badsets(t, n)
    raise InvalidArgument(f"unknown method {method!r}")


@dataclass(frozen=True)
class LowerBoundScan:
    n: int
    ratios: dict[int, Fraction]
    argmax: int
    max_ratio: Fraction

    @property
    def achieved(self) -> bool:
        """Some k in the range has B_{2k,n} >= n^k / (2k)!."""
        return self.max_ratio >= 1


def scan_lower_bound(t: SieveTables, n: int, k_lo: int, k_hi: int, dist: WeightDistribution | None = None) -> LowerBoundScan:
    """Exact ratios B_{2k,n} (2k)! / n^k for k_lo <= k <= k_hi."""
    if k_lo < 1 or k_hi < k_lo:
        raise InvalidArgument(f"need 1 <= k_lo <= k_hi, got {k_lo}, {k_hi}")
    if dist is None:
        dist = badset_counts(t, n)
    ratios = {k: Fraction(dist.B(k) * math.factorial(2 * k), n**k) for k in range(k_lo, k_hi + 1)}
    best = max(ratios, key=lambda k: (ratios[k], -k))
    return LowerBoundScan(n, ratios, best, ratios[best])


def expected_size(t: SieveTables, n: int) -> int:
    return squarefree_count(t, n)
