"""Compiled enumeration kernels.

All Gray-code kernels split the 2^n index range into ``n_seg`` contiguous
segments; each segment re-derives its counters from scratch at its first
index, so segment results depend only on the segmentation, never on thread
scheduling.
"""

from __future__ import annotations

import numba as nb
import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _ctz(t):
    b = 0
    while (t & 1) == 0:
        t >>= 1
        b += 1
    return b


@njit(cache=True, parallel=True)
def gray_hardcore_hist(nbr, deg, n_odd, n_seg):
    """Histogram over A of (|A|, #odd vertices with no retained neighbor in A).

    ``nbr[i, :deg[i]]`` lists the odd-vertex indices adjacent to even vertex i.
    Returns int64 array of shape (n_seg, n_even+1, n_odd+1).
    """
    n_even = nbr.shape[0]
    total = np.int64(1) << n_even
    seg_len = total // n_seg
    out = np.zeros((n_seg, n_even + 1, n_odd + 1), dtype=np.int64)
    for s in prange(n_seg):
        cnt = np.zeros(n_odd, dtype=np.int32)
        t0 = s * seg_len
        a = t0 ^ (t0 >> 1)
        size = 0
        for i in range(n_even):
            if (a >> i) & 1:
                size += 1
                for j in range(deg[i]):
                    cnt[nbr[i, j]] += 1
        free = 0
        for v in range(n_odd):
            if cnt[v] == 0:
                free += 1
        h = out[s]
        h[size, free] += 1
        for t in range(t0 + 1, t0 + seg_len):
            i = _ctz(t)
            if (a >> i) & 1:
                size -= 1
                for j in range(deg[i]):
                    v = nbr[i, j]
                    cnt[v] -= 1
                    if cnt[v] == 0:
                        free += 1
            else:
                size += 1
                for j in range(deg[i]):
                    v = nbr[i, j]
                    if cnt[v] == 0:
                        free -= 1
                    cnt[v] += 1
            a ^= np.int64(1) << i
            h[size, free] += 1
    return out


@njit(cache=True, parallel=True)
def gray_weighted_sum(nbr, deg, n_odd, lam_pow, base_w, n_seg):
    """Segment sums of lam_pow[|A|] * prod_v base_w[|N(v) ∩ A|] over odd v.

    The running product is updated by per-counter ratios and rebuilt from the
    exact integer counters every 4096 steps, which bounds the drift.  Terms
    are summed in blocks of 4096 that feed a Neumaier accumulator.
    """
    n_even = nbr.shape[0]
    n_c = base_w.shape[0]
    ratio = np.ones((n_c, n_c))
    for a in range(n_c):
        for b in range(n_c):
            ratio[a, b] = base_w[b] / base_w[a]
    total = np.int64(1) << n_even
    seg_len = total // n_seg
    sums = np.zeros(n_seg)
    for s in prange(n_seg):
        cnt = np.zeros(n_odd, dtype=np.int32)
        t0 = s * seg_len
        a = t0 ^ (t0 >> 1)
        size = 0
        for i in range(n_even):
            if (a >> i) & 1:
                size += 1
                for j in range(deg[i]):
                    cnt[nbr[i, j]] += 1
        prod = 1.0
        for v in range(n_odd):
            prod *= base_w[cnt[v]]
        block = lam_pow[size] * prod
        acc = 0.0
        comp = 0.0
        for t in range(t0 + 1, t0 + seg_len):
            i = _ctz(t)
            if (a >> i) & 1:
                size -= 1
                for j in range(deg[i]):
                    v = nbr[i, j]
                    c = cnt[v]
                    prod *= ratio[c, c - 1]
                    cnt[v] = c - 1
            else:
                size += 1
                for j in range(deg[i]):
                    v = nbr[i, j]
                    c = cnt[v]
                    prod *= ratio[c, c + 1]
                    cnt[v] = c + 1
            a ^= np.int64(1) << i
            if (t & 4095) == 0:
                prod = 1.0
                for v in range(n_odd):
                    prod *= base_w[cnt[v]]
                y = acc + block
                if abs(acc) >= abs(block):
                    comp += (acc - y) + block
                else:
                    comp += (block - y) + acc
                acc = y
                block = 0.0
            block += lam_pow[size] * prod
        y = acc + block
        if abs(acc) >= abs(block):
            comp += (acc - y) + block
        else:
            comp += (block - y) + acc
        sums[s] = y + comp
    return sums


@njit(cache=True)
def spin_counts(n, eu, ev, k):
    """Counts N[s, e] over maps b: V -> {0,1}^k.

    s = total number of set bits, e = number of edges uv with b_u & b_v != 0.
    For k=1 this is the (|I|, |E(I)|) table of all vertex subsets.
    """
    m = eu.shape[0]
    kn = k * n
    out = np.zeros((kn + 1, m + 1), dtype=np.int64)
    mask = (1 << k) - 1
    total = np.int64(1) << kn
    for c in range(total):
        s = 0
        x = c
        while x:
            x &= x - 1
            s += 1
        e = 0
        for j in range(m):
            bu = (c >> (k * eu[j])) & mask
            bv = (c >> (k * ev[j])) & mask
            if bu & bv:
                e += 1
        out[s, e] += 1
    return out


@njit(cache=True)
def _layer_independent(nbmask, L):
    """Indicator and size of every independent subset of one layer."""
    full = 1 << L
    ok = np.zeros(full, dtype=np.bool_)
    size = np.zeros(full, dtype=np.int64)
    for mask in range(full):
        good = True
        x = mask
        cnt = 0
        while x:
            low = x & (-x)
            y = 0
            while (low >> y) != 1:
                y += 1
            if nbmask[y] & mask:
                good = False
                break
            x ^= low
            cnt += 1
        ok[mask] = good
        if good:
            s = 0
            x = mask
            while x:
                x &= x - 1
                s += 1
            size[mask] = s
    return ok, size


@njit(cache=True)
def layered_hardcore(d, keep_idx, lam):
    """Z(sample, lam) for a retained-edge subgraph of Q_d, d >= 2.

    Vertices are split by their two lowest bits into four layers, each a copy
    of Q_{d-2}, arranged in the cycle 00-01-11-10.  Layers 00 and 11 are
    enumerated jointly; layers 01 and 10 are summed out with subset-sum
    (zeta) transforms because given the outer layers they are independent.

    ``keep_idx[u, j]`` is 1 iff edge {u, u ^ 2^j} is retained.
    """
    m = d - 2
    L = 1 << m
    full = (1 << L) - 1
    nb = np.zeros((4, L), dtype=np.int64)
    for x in range(4):
        for y in range(L):
            u = (y << 2) | x
            row = 0
            for j in range(2, d):
                if keep_idx[u, j]:
                    row |= 1 << (y ^ (1 << (j - 2)))
            nb[x, y] = row
    r01 = 0
    r13 = 0
    r32 = 0
    r20 = 0
    for y in range(L):
        base = y << 2
        if keep_idx[base | 0, 0]:
            r01 |= 1 << y
        if keep_idx[base | 1, 1]:
            r13 |= 1 << y
        if keep_idx[base | 3, 0]:
            r32 |= 1 << y
        if keep_idx[base | 2, 1]:
            r20 |= 1 << y
    lam_pow = np.ones(L + 1)
    for i in range(1, L + 1):
        lam_pow[i] = lam_pow[i - 1] * lam

    ok1, sz1 = _layer_independent(nb[1], L)
    ok2, sz2 = _layer_independent(nb[2], L)
    h1 = np.zeros(full + 1)
    h2 = np.zeros(full + 1)
    for mask in range(full + 1):
        if ok1[mask]:
            h1[mask] = lam_pow[sz1[mask]]
        if ok2[mask]:
            h2[mask] = lam_pow[sz2[mask]]
    for b in range(L):
        bit = 1 << b
        for mask in range(full + 1):
            if mask & bit:
                h1[mask] += h1[mask ^ bit]
                h2[mask] += h2[mask ^ bit]

    ok0, sz0 = _layer_independent(nb[0], L)
    ok3, sz3 = _layer_independent(nb[3], L)
    n3 = 0
    for mask in range(full + 1):
        if ok3[mask]:
            n3 += 1
    list3 = np.empty(n3, dtype=np.int64)
    w3 = np.empty(n3)
    j = 0
    for mask in range(full + 1):
        if ok3[mask]:
            list3[j] = mask
            w3[j] = lam_pow[sz3[mask]]
            j += 1
    total = 0.0
    comp = 0.0
    for i0 in range(full + 1):
        if not ok0[i0]:
            continue
        a1 = i0 & r01
        a2 = i0 & r20
        part = 0.0
        for j in range(n3):
            i3 = list3[j]
            u1 = a1 | (i3 & r13)
            u2 = a2 | (i3 & r32)
            part += w3[j] * h1[full ^ u1] * h2[full ^ u2]
        term = part * lam_pow[sz0[i0]]
        y = total + term
        if abs(total) >= abs(term):
            comp += (total - y) + term
        else:
            comp += (term - y) + total
        total = y
    return total + comp


def set_threads(workers: int) -> int:
    """Clamp the numba thread pool to the requested worker count."""
    n = max(1, min(int(workers), nb.config.NUMBA_NUM_THREADS))
    nb.set_num_threads(n)
    return n
