"""Compiled inner loops. All kernels release the GIL so chunks can run on threads."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def partial_sums_float(values, parent, pidx, record, out):
    """Running sums of theta over the squarefree list for a batch of paths.

    values: (paths, n_primes) realized X_p; parent[j] is the list position of
    l_j / spf(l_j); pidx[j] the prime index of spf(l_j); record[g] the list
    position after which S is written to out[:, g].
    """
    npaths = values.shape[0]
    s = parent.shape[0]
    g_count = record.shape[0]
    th = np.empty(s, dtype=np.float64)
    for r in range(npaths):
        x = values[r]
        th[0] = 1.0
        acc = 1.0
        g = 0
        while g < g_count and record[g] == 0:
            out[r, g] = acc
            g += 1
        for j in range(1, s):
            v = th[parent[j]] * x[pidx[j]]
            th[j] = v
            acc += v
            while g < g_count and record[g] == j:
                out[r, g] = acc
                g += 1
    return out


@njit(cache=True, nogil=True)
def partial_sums_sign(signs, parent, pidx, record, out):
    """Same as ``partial_sums_float`` for +-1 values stored as int8."""
    npaths = signs.shape[0]
    s = parent.shape[0]
    g_count = record.shape[0]
    th = np.empty(s, dtype=np.int8)
    for r in range(npaths):
        x = signs[r]
        th[0] = 1
        acc = 1
        g = 0
        while g < g_count and record[g] == 0:
            out[r, g] = acc
            g += 1
        for j in range(1, s):
            v = th[parent[j]] * x[pidx[j]]
            th[j] = v
            acc += v
            while g < g_count and record[g] == j:
                out[r, g] = acc
                g += 1
    return out


@njit(cache=True, nogil=True)
def theta_values(x, parent, pidx):
    s = parent.shape[0]
    th = np.empty(s, dtype=np.float64)
    th[0] = 1.0
    for j in range(1, s):
        th[j] = th[parent[j]] * x[pidx[j]]
    return th


@njit(cache=True, nogil=True)
def unpack_sign_bits(raw, n_primes, out):
    """Sign of prime index i is bit (i % 64) of raw word i // 64: 0 -> +1, 1 -> -1."""
    for i in range(n_primes):
        bit = (raw[i >> 6] >> np.uint64(i & 63)) & np.uint64(1)
        out[i] = 1 - 2 * np.int8(bit)
    return out


@njit(cache=True, nogil=True)
def gray_histogram(m, start, stop, mult_ptr, mult_idx, s_len, hist, offset):
    """Histogram of S over the Gray-code range [start, stop) of sign vectors.

    Bit b of the Gray code is the sign of the b-th enumerated prime (1 means -1);
    flipping it negates theta on that prime's multiples, listed in
    mult_idx[mult_ptr[b]:mult_ptr[b + 1]] as positions into the theta array.
    """
    th = np.ones(s_len, dtype=np.int8)
    total = s_len
    code = start ^ (start >> 1)
    for b in range(m):
        if (code >> b) & 1:
            for q in range(mult_ptr[b], mult_ptr[b + 1]):
                j = mult_idx[q]
                total -= 2 * th[j]
                th[j] = -th[j]
    hist[total + offset] += 1
    for g in range(start + 1, stop):
        # the bit that changes between gray(g-1) and gray(g) is the lowest set bit of g
        b = 0
        x = g
        while (x & 1) == 0:
            x >>= 1
            b += 1
        for q in range(mult_ptr[b], mult_ptr[b + 1]):
            j = mult_idx[q]
            total -= 2 * th[j]
            th[j] = -th[j]
        hist[total + offset] += 1
    return hist


@njit(cache=True, nogil=True)
def xor_popcount_tally(left, right, tally, cap):
    """tally[w] += #{(a, b) : popcount(left[a] ^ right[b]) == w} for multiword bit rows."""
    words = left.shape[1]
    for a in range(left.shape[0]):
        for b in range(right.shape[0]):
            w = 0
            for k in range(words):
                v = left[a, k] ^ right[b, k]
                # SWAR popcount
                v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
                v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
                v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
                w += np.int64((v * np.uint64(0x0101010101010101)) >> np.uint64(56))
            if w <= cap:
                tally[w] += 1
    return tally
