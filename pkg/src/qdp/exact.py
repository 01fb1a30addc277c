"""Exact and log-space partition functions.

Temperature enters only through the edge-retention probability ``p``; the
per-edge penalty is ``q = 1 - p`` (so ``exp(-beta) = q``).  With rational
``lam`` and ``p`` every quantity here is an exact ``Fraction``; hypercube
scale sums that cannot be held exactly come back as :class:`LogScalar`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .graph import (EVEN, ODD, BudgetExceeded, Graph, SubgraphSample,
                    build_hypercube, members)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class ModelParams:
    d: int
    k: int = 1
    lam: Fraction = Fraction(1)
    p: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "p", as_fraction(self.p))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0,1]")

    @property
    def q(self) -> Fraction:
        return 1 - self.p

    @property
    def beta(self) -> float:
        return math.inf if self.p == 1 else -math.log1p(-float(self.p))

    @staticmethod
    def from_beta(d: int, k: int, lam, beta: float) -> "ModelParams":
        p = 1.0 if math.isinf(beta) else -math.expm1(-beta)
        return ModelParams(d, k, lam, as_fraction(p))

    def with_(self, **kw) -> "ModelParams":
        cur = asdict(self)
        cur.update(kw)
        return ModelParams(**cur)

    def to_json(self) -> dict:
        return {"d": self.d, "k": self.k, "lambda": frac_str(self.lam), "p": frac_str(self.p)}


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def log2_fraction(x: Fraction) -> float:
    if x <= 0:
        raise ValueError("log of a non-positive value")
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True)
class LogScalar:
    """A non-negative real held as its base-2 logarithm (sign 0 means zero)."""

    log2_value: float
    sign: int = 1

    @staticmethod
    def zero() -> "LogScalar":
        return LogScalar(-math.inf, 0)

    @staticmethod
    def of(x) -> "LogScalar":
        if isinstance(x, Fraction) or isinstance(x, int):
            return LogScalar.zero() if x == 0 else LogScalar(log2_fraction(Fraction(x)))
        if x < 0:
            raise ValueError("LogScalar holds non-negative values only")
        return LogScalar.zero() if x == 0 else LogScalar(math.log2(x))

    def __add__(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        return LogScalar(float(np.logaddexp2(self.log2_value, other.log2_value)))

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0 or other.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.log2_value + other.log2_value)

    @property
    def ln(self) -> float:
        return self.log2_value * math.log(2)

    def to_float(self) -> float:
        return 0.0 if self.sign == 0 else 2.0 ** self.log2_value

    def to_json(self) -> dict:
        return {"kind": "log2", "log2": self.log2_value, "sign": self.sign}


@dataclass(frozen=True)
class Budgets:
    spin_bits: int = 26           # log2 of configurations in spin enumeration
    edge_subsets_bits: int = 16   # |E| limit for the edge-subset algorithm
    vertex_masks_bits: int = 12   # |V| limit for the edge-subset algorithm
    ktuple_bits: int = 24         # log2 of even-side k-tuples for Q_d
    gray_bits: int = 32           # even-side size limit for Gray-code sums
    exact_side_bits: int = 16     # even-side size limit for exact rational grouping

    @staticmethod
    def current() -> "Budgets":
        raw = os.environ.get("QDP_BUDGETS")
        if not raw:
            return Budgets()
        return Budgets(**json.loads(raw))


def _check(cond: bool, what: str) -> None:
    if not cond:
        raise BudgetExceeded(what)


def _poly_eval(table: np.ndarray, x: Fraction, y: Fraction) -> Fraction:
    """Sum over table[s, e] * x^s * y^e, exactly."""
    total = Fraction(0)
    xs = [Fraction(1)]
    for _ in range(table.shape[0]):
        xs.append(xs[-1] * x)
    ys = [Fraction(1)]
    for _ in range(table.shape[1]):
        ys.append(ys[-1] * y)
    rows, cols = np.nonzero(table)
    for s, e in zip(rows.tolist(), cols.tolist()):
        total += int(table[s, e]) * xs[s] * ys[e]
    return total


def _spin_table(g: Graph, k: int) -> np.ndarray:
    b = Budgets.current()
    _check(k * g.vertex_count <= b.spin_bits,
           f"spin enumeration needs 2^{k * g.vertex_count} > 2^{b.spin_bits} configurations")
    return _spin_table_cached(g, k)


@lru_cache(maxsize=256)
def _spin_table_cached(g: Graph, k: int) -> np.ndarray:
    eu = np.array([e[0] for e in g.edge_list], dtype=np.int64)
    ev = np.array([e[1] for e in g.edge_list], dtype=np.int64)
    return kernels.spin_counts(g.vertex_count, eu, ev, k)


def _side_tables(g: Graph, side: int, adjacency=None):
    """Neighbor index table from ``side`` to the other class."""
    adjacency = g.adjacency if adjacency is None else adjacency
    src = members(g.side_mask(side))
    dst = members(g.side_mask(1 - side))
    pos = {v: i for i, v in enumerate(dst)}
    rows = [[pos[w] for w in members(adjacency[u])] for u in src]
    maxdeg = max((len(r) for r in rows), default=0)
    nbr = np.zeros((len(src), max(maxdeg, 1)), dtype=np.int64)
    deg = np.zeros(len(src), dtype=np.int64)
    for i, r in enumerate(rows):
        nbr[i, :len(r)] = r
        deg[i] = len(r)
    return nbr, deg, len(dst)


def _segments(n_src: int, workers: int) -> int:
    seg = 1
    while seg < workers:
        seg *= 2
    return min(seg, 1 << n_src)


def bipartite_hardcore_table(g: Graph, side: int = EVEN, workers: int = 1,
                             adjacency=None) -> np.ndarray:
    """Table T[a, f]: number of A ⊆ side with |A| = a leaving f free vertices on the other side.

    Then Z(g, lam) = sum T[a, f] lam^a (1 + lam)^f.
    """
    nbr, deg, n_dst = _side_tables(g, side, adjacency)
    _check(nbr.shape[0] <= Budgets.current().gray_bits,
           f"Gray-code side of size {nbr.shape[0]} exceeds budget")
    kernels.set_threads(workers)
    parts = kernels.gray_hardcore_hist(nbr, deg, n_dst, _segments(nbr.shape[0], workers))
    return parts.sum(axis=0)


def _hardcore_from_table(table: np.ndarray, lam: Fraction) -> Fraction:
    return _poly_eval(table, lam, 1 + lam)


def count_independent_sets(g: Graph, workers: int = 1) -> int:
    return int(hardcore_partition(g, 1, workers=workers))


def hardcore_partition(g: Graph, lam, workers: int = 1) -> Fraction:
    lam = as_fraction(lam)
    if g.bipartition is not None and min(
            g.bipartition[0].bit_count(), g.bipartition[1].bit_count()) <= Budgets.current().gray_bits \
            and g.vertex_count > 8:
        side = EVEN if g.bipartition[0].bit_count() <= g.bipartition[1].bit_count() else ODD
        return _hardcore_from_table(bipartite_hardcore_table(g, side, workers), lam)
    table = _spin_table(g, 1)
    return _poly_eval(table[:, :1], lam, Fraction(0))


def _local_keys(g: Graph, side: int, k: int, chunk_bits: int | None = None):
    """Yield (sizes, keys) for all k-tuples of subsets of ``side``, chunked.

    keys[t, j] encodes (A_1 ∩ N(v_j), ..., A_k ∩ N(v_j)) for other-side v_j,
    each A_i ∩ N(v) written as a deg(v)-bit local mask.
    """
    src = members(g.side_mask(side))
    dst = members(g.side_mask(1 - side))
    pos = {u: i for i, u in enumerate(src)}
    n = len(src)
    local = []
    for v in dst:
        local.append([pos[u] for u in members(g.adjacency[v])])
    maxdeg = max(len(r) for r in local)
    # bitmask over src positions -> local mask at each dst vertex
    subsets = np.arange(1 << n, dtype=np.int64)
    loc = np.zeros((1 << n, len(dst)), dtype=np.int64)
    for j, nb in enumerate(local):
        for b, u in enumerate(nb):
            loc[:, j] |= ((subsets >> u) & 1) << b
    sizes1 = np.bitwise_count(subsets.astype(np.uint64)).astype(np.int64)
    total_bits = k * n
    chunk_bits = min(total_bits, chunk_bits or 20)
    chunk = 1 << chunk_bits
    for start in range(0, 1 << total_bits, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        keys = np.zeros((chunk, len(dst)), dtype=np.int64)
        sizes = np.zeros(chunk, dtype=np.int64)
        for i in range(k):
            a = (idx >> (i * n)) & ((1 << n) - 1)
            keys |= loc[a] << (i * maxdeg)
            sizes += sizes1[a]
        yield sizes, keys, maxdeg


def _grouped_product_sum(g: Graph, side: int, k: int, lam: Fraction, factor) -> Fraction:
    """Sum over k-tuples of lam^{sum |A_i|} * prod_v factor(key_v), grouped exactly."""
    groups: dict[tuple, int] = {}
    maxdeg = 0
    for sizes, keys, maxdeg in _local_keys(g, side, k):
        keys.sort(axis=1)
        rows = np.concatenate([sizes[:, None], keys], axis=1)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, c in zip(uniq.tolist(), counts.tolist()):
            t = tuple(row)
            groups[t] = groups.get(t, 0) + c
    cache: dict[int, Fraction] = {}
    total = Fraction(0)
    lam_pows = {}
    for row, c in groups.items():
        s = row[0]
        term = lam_pows.get(s)
        if term is None:
            term = lam_pows[s] = lam ** s
        for key in row[1:]:
            f = cache.get(key)
            if f is None:
                f = cache[key] = factor(key, maxdeg)
            term *= f
        total += c * term
    return total


def _unpack(key: int, k: int, maxdeg: int) -> list[int]:
    m = (1 << maxdeg) - 1
    return [(key >> (i * maxdeg)) & m for i in range(k)]


def _odd_factor_direct(k, lam, q):
    def factor(key, maxdeg):
        a = _unpack(key, k, maxdeg)
        tot = Fraction(0)
        for b in range(1 << k):
            u = 0
            for i in range(k):
                if (b >> i) & 1:
                    u |= a[i]
            tot += lam ** b.bit_count() * q ** u.bit_count()
        return tot
    return factor


def _odd_factor_star(k, lam, p, q, deg):
    def factor(key, maxdeg):
        a = _unpack(key, k, maxdeg)
        tot = Fraction(0)
        for w in range(1 << deg):
            prob = p ** w.bit_count() * q ** (deg - w.bit_count())
            prod = Fraction(1)
            for i in range(k):
                prod *= (1 + lam) if (w & a[i]) == 0 else 1
            tot += prob * prod
        return tot
    return factor


def _postemp_bipartite(g: Graph, lam: Fraction, q: Fraction, side: int = EVEN) -> Fraction:
    return _grouped_product_sum(g, side, 1, lam, _odd_factor_direct(1, lam, q))


def postemp_partition(g: Graph, params_or_lam, p=None, side: int = EVEN) -> Fraction:
    """Sum over all I ⊆ V of lam^|I| (1-p)^|E(I)|."""
    lam, p = _lam_p(params_or_lam, p)
    q = 1 - p
    if g.bipartition is not None and g.vertex_count > 8:
        n_side = g.bipartition[side].bit_count()
        _check(n_side <= Budgets.current().exact_side_bits,
               f"exact rational sum over a side of {n_side} vertices exceeds budget; "
               "use hypercube_postemp_logZ")
        return _postemp_bipartite(g, lam, q, side)
    return _poly_eval(_spin_table(g, 1), lam, q)


def _lam_p(params_or_lam, p):
    if isinstance(params_or_lam, ModelParams):
        return params_or_lam.lam, params_or_lam.p
    return as_fraction(params_or_lam), as_fraction(p)


def ksystem_partition(g: Graph, params: ModelParams, algorithm: str = "direct") -> Fraction:
    """Z_k by direct k-tuple summation or by the random-subgraph moment.

    ``direct``: sum over (I_1..I_k) of lam^{sum|I_i|} q^{|E(I_1) ∪ ... ∪ E(I_k)|}.
    ``edge_subsets``: sum over retained edge sets w of p^|w| q^{|E|-|w|} Z(w, lam)^k.
    """
    lam, p, k = params.lam, params.p, params.k
    q = 1 - p
    b = Budgets.current()
    if algorithm == "direct":
        if g.dim is not None and g.vertex_count > 8:
            n_side = g.bipartition[EVEN].bit_count()
            _check(k * n_side <= b.ktuple_bits, f"2^{k * n_side} even-side k-tuples exceed budget")
            return _grouped_product_sum(g, EVEN, k, lam, _odd_factor_direct(k, lam, q))
        return _poly_eval(_spin_table(g, k), lam, q)
    if algorithm == "edge_subsets":
        if g.dim is not None and g.edge_count > b.edge_subsets_bits:
            # stars of the odd vertices partition E(Q_d), so the expectation
            # over retained edges factorizes star by star
            n_side = g.bipartition[EVEN].bit_count()
            _check(k * n_side <= b.ktuple_bits, f"2^{k * n_side} even-side k-tuples exceed budget")
            return _grouped_product_sum(g, EVEN, k, lam, _odd_factor_star(k, lam, p, q, g.dim))
        return _edge_subset_moment(g, lam, p, k)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def independence_polynomials_by_edge_subset(g: Graph) -> dict[tuple, dict[int, int]]:
    """Map independence-polynomial coefficient rows -> {|w|: multiplicity} over edge sets w."""
    b = Budgets.current()
    m, n = g.edge_count, g.vertex_count
    _check(m <= b.edge_subsets_bits, f"|E|={m} exceeds the edge-subset budget")
    _check(n <= b.vertex_masks_bits, f"|V|={n} exceeds the edge-subset budget")
    return {poly: dict(by_size) for poly, by_size in _polys_by_edge_subset(g).items()}


@lru_cache(maxsize=128)
def _polys_by_edge_subset(g: Graph) -> dict[tuple, dict[int, int]]:
    m, n = g.edge_count, g.vertex_count
    masks = np.arange(1 << n, dtype=np.int64)
    span = np.zeros(1 << n, dtype=np.int64)
    for j, (u, v) in enumerate(g.edge_list):
        span |= (((masks >> u) & 1) & ((masks >> v) & 1)) << j
    pc = np.bitwise_count(masks.astype(np.uint64)).astype(np.int64)
    onehot = np.zeros((1 << n, n + 1), dtype=np.int64)
    onehot[masks, pc] = 1
    out: dict[tuple, dict[int, int]] = {}
    chunk = max(1, (1 << 22) >> n)
    for start in range(0, 1 << m, chunk):
        w = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        indep = (span[None, :] & w[:, None]) == 0
        polys = indep.astype(np.int64) @ onehot
        sizes = np.bitwise_count(w.astype(np.uint64)).astype(np.int64)
        rows = np.concatenate([sizes[:, None], polys], axis=1)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, c in zip(uniq.tolist(), counts.tolist()):
            poly = tuple(row[1:])
            bucket = out.setdefault(poly, {})
            bucket[row[0]] = bucket.get(row[0], 0) + c
    return out


def _edge_subset_moment(g: Graph, lam: Fraction, p: Fraction, k: int) -> Fraction:
    q = 1 - p
    m = g.edge_count
    total = Fraction(0)
    independence_polynomials_by_edge_subset(g)
    for poly, by_size in _polys_by_edge_subset(g).items():
        zval = sum(Fraction(c) * lam ** s for s, c in enumerate(poly))
        zk = zval ** k
        for j, c in by_size.items():
            total += c * p ** j * q ** (m - j) * zk
    return total


def _base_weights(lam: float, q: float, maxdeg: int) -> np.ndarray:
    return np.array([(1 + lam * q ** c) / (1 + lam) for c in range(maxdeg + 1)])


def hypercube_postemp_logZ(params: ModelParams, workers: int = 1, side: int = EVEN) -> LogScalar:
    """log2 of Z(Q_d, lam, beta) via Gray-code order over one side."""
    d = params.d
    if not 1 <= d <= 6:
        raise ValueError("hypercube_postemp_logZ supports 1 <= d <= 6")
    g = build_hypercube(d)
    nbr, deg, n_dst = _side_tables(g, side)
    lam = float(params.lam)
    q = float(params.q)
    n_src = nbr.shape[0]
    lam_pow = np.exp(np.arange(n_src + 1) * math.log(lam) - n_src * math.log1p(lam))
    base_w = _base_weights(lam, q, d)
    kernels.set_threads(workers)
    parts = kernels.gray_weighted_sum(nbr, deg, n_dst, lam_pow, base_w, _segments(n_src, workers))
    total = math.fsum(parts.tolist())
    return LogScalar(math.log2(total) + g.vertex_count * math.log2(1 + lam))


def _retained_adjacency(sample: SubgraphSample) -> list[int]:
    g = sample.base
    adj = [0] * g.vertex_count
    for (u, v), keep in zip(g.edge_list, sample.retained_edges.tolist()):
        if keep:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
    return adj


def sample_hardcore_exact(sample: SubgraphSample, lam=1, workers: int = 1) -> Fraction:
    """Exact Z(sample, lam) via the Gray-code histogram over the even side."""
    g = sample.base
    if g.dim is None or g.dim > 6:
        raise ValueError("sample must come from Q_d with d <= 6")
    table = bipartite_hardcore_table(g, EVEN, workers, _retained_adjacency(sample))
    return _hardcore_from_table(table, as_fraction(lam))


def keep_matrix(sample: SubgraphSample) -> np.ndarray:
    """keep[u, j] = 1 iff edge {u, u ^ 2^j} survives in the sample."""
    g = sample.base
    d = g.dim
    keep = np.zeros((g.vertex_count, d), dtype=np.uint8)
    eu = np.array([e[0] for e in g.edge_list])
    ev = np.array([e[1] for e in g.edge_list])
    j = np.log2(eu ^ ev).astype(np.int64)
    r = sample.retained_edges.astype(np.uint8)
    keep[eu, j] = r
    keep[ev, j] = r
    return keep


def hardcore_on_sample_logZ(sample: SubgraphSample, lam=1, method: str = "gray",
                            workers: int = 1) -> LogScalar:
    """log2 Z(sample, lam) for a sampled subgraph of Q_d, d <= 6.

    ``gray`` is exact (integer histogram); ``layered`` is the fast
    floating-point transfer kernel used for Monte Carlo at d = 6.
    """
    g = sample.base
    if g.dim is None or g.dim > 6:
        raise ValueError("sample must come from Q_d with d <= 6")
    if method == "gray":
        return LogScalar.of(sample_hardcore_exact(sample, lam, workers))
    if method == "layered":
        if g.dim < 2:
            return LogScalar.of(sample_hardcore_exact(sample, lam, workers))
        z = kernels.layered_hardcore(g.dim, keep_matrix(sample), float(as_fraction(lam)))
        return LogScalar(math.log2(z))
    raise ValueError(f"unknown method {method!r}")


def result_record(op: str, params: dict, value, runtime_ms: float) -> dict:
    if isinstance(value, LogScalar):
        val = value.to_json()
    elif isinstance(value, (Fraction, int)):
        val = {"kind": "rational", "value": frac_str(Fraction(value))}
    else:
        val = {"kind": "float", "value": value}
    return {"op": op, "params": params, "value": val, "runtime_ms": runtime_ms}
