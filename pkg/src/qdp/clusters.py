"""Clusters of polymers, Ursell coefficients and truncated cluster series.

A cluster is an ordered tuple of polymers whose incompatibility graph is
connected; its weight is the Ursell coefficient of that graph times the
product of polymer weights.  Sums over clusters are organised by multiset:
all orderings of one multiset share the same incompatibility graph up to
relabelling, so they contribute C(H) / prod(m_j!) * prod(weights), where
C(H) is the signed count of connected spanning edge subsets.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .exact import ModelParams, as_fraction
from .graph import EVEN, ODD, BudgetExceeded, Graph, build_hypercube, members, parity
from .polymers import (DefectVector, Polymer, closure_limit, enumerate_polymers,
                       incompatible, polymer_weight_factorized)

MAX_ORDER = 4
URSELL_MAX_VERTICES = 8


def _connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            comps -= 1
    return comps == 1


@lru_cache(maxsize=None)
def connected_signed_count(n: int, edges: frozenset) -> int:
    """Sum over connected spanning edge subsets S of (-1)^|S|, by direct enumeration."""
    if n > URSELL_MAX_VERTICES:
        raise BudgetExceeded(f"Ursell function on {n} > {URSELL_MAX_VERTICES} vertices")
    el = sorted(edges)
    total = 0
    for r in range(len(el) + 1):
        if r < n - 1:
            continue
        for sub in itertools.combinations(el, r):
            if _connected(n, sub):
                total += -1 if r % 2 else 1
    return total


def connected_signed_count_by_subsets(n: int, edges: Iterable[tuple[int, int]]) -> int:
    """Same quantity via the exponential formula over vertex subsets.

    For a vertex set W the full signed sum over all edge subsets of H[W] is
    1 if H[W] has no edges and 0 otherwise; splitting off the component of a
    fixed vertex gives a recursion for the connected part.
    """
    edges = list(edges)
    has_edge = {}
    for w in range(1 << n):
        has_edge[w] = any((w >> u) & 1 and (w >> v) & 1 for u, v in edges)
    conn = {}
    for w in range(1, 1 << n):
        low = w & -w
        val = 0 if has_edge[w] else 1
        rest = w ^ low
        sub = rest
        while True:
            part = sub | low
            if part != w:
                other = w ^ part
                if not has_edge[other]:
                    val -= conn[part]
            if sub == 0:
                break
            sub = (sub - 1) & rest
        conn[w] = val
    return conn[(1 << n) - 1]


def ursell(n: int, edges: Iterable[tuple[int, int]]) -> Fraction:
    key = frozenset((min(u, v), max(u, v)) for u, v in edges)
    return Fraction(connected_signed_count(n, key), math.factorial(n))


@dataclass(frozen=True)
class Cluster:
    polymers: tuple[Polymer, ...]

    @property
    def size(self) -> int:
        return sum(g.size for g in self.polymers)

    @property
    def span(self) -> frozenset[int]:
        out = frozenset()
        for g in self.polymers:
            out |= g.span
        return out

    @property
    def support(self) -> int:
        s = 0
        for g in self.polymers:
            s |= g.support
        return s

    def incompatibility_edges(self) -> list[tuple[int, int]]:
        ps = self.polymers
        return [(i, j) for i in range(len(ps)) for j in range(i + 1, len(ps))
                if incompatible(ps[i], ps[j])]

    def is_connected(self) -> bool:
        return _connected(len(self.polymers), self.incompatibility_edges())

    def ursell(self) -> Fraction:
        return ursell(len(self.polymers), self.incompatibility_edges())


class PolymerSystem:
    """All polymers up to a size for one (d, defect vector), with cached weights."""

    def __init__(self, d: int, defects: DefectVector, max_size: int,
                 enforce_closure: bool = True):
        if max_size > MAX_ORDER:
            raise BudgetExceeded(f"cluster order {max_size} exceeds {MAX_ORDER}")
        self.d = d
        self.defects = defects
        self.max_size = max_size
        self.graph = build_hypercube(d)
        self.polymers = list(enumerate_polymers(d, defects, max_size,
                                                enforce_closure=enforce_closure))
        self.index = {g: i for i, g in enumerate(self.polymers)}
        self.sizes = [g.size for g in self.polymers]
        by_vertex = defaultdict(list)
        for i, g in enumerate(self.polymers):
            for v in members(g.support):
                by_vertex[v].append(i)
        self.by_vertex = by_vertex
        self._nbrs: dict[int, list[int]] = {}
        self._weights: dict[tuple, list[Fraction]] = {}

    def neighbors(self, i: int) -> list[int]:
        """Indices of polymers incompatible with polymer i (including i itself)."""
        out = self._nbrs.get(i)
        if out is not None:
            return out
        g = self.polymers[i]
        reach = set()
        for u in members(g.support):
            reach.add(u)
            for a in range(self.d):
                reach.add(u ^ (1 << a))
                for b in range(a + 1, self.d):
                    reach.add(u ^ (1 << a) ^ (1 << b))
        cand = set()
        for v in reach:
            cand.update(self.by_vertex.get(v, ()))
        out = sorted(j for j in cand if incompatible(g, self.polymers[j]))
        self._nbrs[i] = out
        return out

    def weights(self, lam: Fraction, p: Fraction) -> list[Fraction]:
        key = (lam, p)
        w = self._weights.get(key)
        if w is None:
            w = [polymer_weight_factorized(self.graph, g, lam, p) for g in self.polymers]
            self._weights[key] = w
        return w

    def roots(self) -> list[int]:
        """One representative vertex per parity class that occurs in the defect vector."""
        return [r for r, side in ((0, EVEN), (1, ODD)) if side in self.defects.sides]


def connected_multisets(system: PolymerSystem, max_total: int,
                        root: int | None = None) -> Iterator[tuple[int, ...]]:
    """Sorted index tuples of connected polymer multisets with total size <= max_total."""
    sizes = system.sizes
    if root is None:
        starts = [i for i, s in enumerate(sizes) if s <= max_total]
    else:
        starts = [i for i in system.by_vertex.get(root, ()) if sizes[i] <= max_total]
    seen = set()
    frontier = []
    for i in starts:
        t = (i,)
        if t not in seen:
            seen.add(t)
            frontier.append((t, sizes[i]))
    while frontier:
        nxt = []
        for t, tot in frontier:
            yield t
            cand = set()
            for i in set(t):
                cand.update(system.neighbors(i))
            for j in cand:
                if tot + sizes[j] > max_total:
                    continue
                u = tuple(sorted(t + (j,)))
                if u not in seen:
                    seen.add(u)
                    nxt.append((u, tot + sizes[j]))
        frontier = nxt


def multiset_graph(system: PolymerSystem, t: tuple[int, ...]) -> list[tuple[int, int]]:
    edges = []
    for a in range(len(t)):
        for b in range(a + 1, len(t)):
            if t[a] == t[b] or t[b] in system.neighbors(t[a]):
                edges.append((a, b))
    return edges


def multiplicity_factor(t: tuple[int, ...]) -> int:
    out = 1
    for _, grp in itertools.groupby(t):
        out *= math.factorial(len(list(grp)))
    return out


def ordered_clusters(system: PolymerSystem, max_total: int) -> Iterator[tuple[int, ...]]:
    """Every connected ordered tuple of polymer indices, by direct product enumeration."""
    sizes = system.sizes
    n_poly = len(system.polymers)

    def extend(prefix, tot):
        if prefix:
            yield tuple(prefix)
        for j in range(n_poly):
            if tot + sizes[j] <= max_total:
                prefix.append(j)
                yield from extend(prefix, tot + sizes[j])
                prefix.pop()

    for t in extend([], 0):
        edges = [(a, b) for a in range(len(t)) for b in range(a + 1, len(t))
                 if t[a] == t[b] or incompatible(system.polymers[t[a]], system.polymers[t[b]])]
        if _connected(len(t), edges):
            yield t


def enumerate_clusters(d: int, defects: DefectVector, max_total_size: int,
                       span_filter: Iterable[int] | None = None,
                       method: str = "auto") -> Iterator[Cluster]:
    """Each ordered cluster once; ``span_filter`` keeps clusters with exactly that span."""
    system = PolymerSystem(d, defects, max_total_size)
    span = None if span_filter is None else frozenset(span_filter)
    if method == "auto":
        method = "tuples" if max_total_size <= 3 else "multisets"
    if method == "tuples":
        source = ordered_clusters(system, max_total_size)
    elif method == "multisets":
        source = (perm for t in connected_multisets(system, max_total_size)
                  for perm in sorted(set(itertools.permutations(t))))
    else:
        raise ValueError(f"unknown method {method!r}")
    for t in source:
        c = Cluster(tuple(system.polymers[i] for i in t))
        if span is None or c.span == span:
            yield c


@dataclass
class ClusterSeries:
    order: int
    terms: dict[int, dict] = field(default_factory=dict)
    total: Fraction = Fraction(0)
    abs_terms: dict[int, Fraction] = field(default_factory=dict)

    def add(self, size: int, count: int, value: Fraction, abs_value: Fraction) -> None:
        slot = self.terms.setdefault(size, {"count": 0, "weight_sum": Fraction(0)})
        slot["count"] += count
        slot["weight_sum"] += value
        self.abs_terms[size] = self.abs_terms.get(size, Fraction(0)) + abs_value
        self.total += value

    def size_sum(self, size: int) -> Fraction:
        return self.terms.get(size, {}).get("weight_sum", Fraction(0))

    def to_json(self) -> dict:
        return {"order": self.order,
                "terms": [{"size": s, "count": v["count"], "weight_sum": str(v["weight_sum"]),
                           "weight_sum_float": float(v["weight_sum"])}
                          for s, v in sorted(self.terms.items())],
                "total": str(self.total), "total_float": float(self.total)}


def _series_from_multisets(system, lam, p, order, span, root_scale, root):
    w = system.weights(lam, p)
    series = ClusterSeries(order)
    for t in connected_multisets(system, order, root):
        polys = [system.polymers[i] for i in t]
        if span is not None:
            sp = frozenset()
            for g in polys:
                sp |= g.span
            if sp != span:
                continue
        size = sum(system.sizes[i] for i in t)
        signed = connected_signed_count(len(t), frozenset(multiset_graph(system, t)))
        if signed == 0:
            continue
        prod = Fraction(1)
        for i in t:
            prod *= w[i]
        mult = multiplicity_factor(t)
        n_orders = math.factorial(len(t)) // mult
        val = Fraction(signed, mult) * prod
        if root_scale:
            supp = 0
            for g in polys:
                supp |= g.support
            val = val * root_scale / supp.bit_count()
            n_orders = Fraction(n_orders * root_scale, supp.bit_count())
        series.add(size, n_orders, val, abs(val))
    return series


def _series_from_tuples(system, lam, p, order, span):
    w = system.weights(lam, p)
    series = ClusterSeries(order)
    for t in ordered_clusters(system, order):
        polys = [system.polymers[i] for i in t]
        if span is not None:
            sp = frozenset()
            for g in polys:
                sp |= g.span
            if sp != span:
                continue
        edges = [(a, b) for a in range(len(t)) for b in range(a + 1, len(t))
                 if t[a] == t[b] or incompatible(polys[a], polys[b])]
        phi = ursell(len(t), edges)
        prod = Fraction(1)
        for i in t:
            prod *= w[i]
        val = phi * prod
        series.add(sum(system.sizes[i] for i in t), 1, val, abs(val))
    return series


_SYSTEMS: dict[tuple, PolymerSystem] = {}


def polymer_system(d: int, defects: DefectVector, max_size: int) -> PolymerSystem:
    key = (d, defects, max_size)
    s = _SYSTEMS.get(key)
    if s is None:
        s = _SYSTEMS[key] = PolymerSystem(d, defects, max_size)
    return s


def cluster_series(params: ModelParams, defects: DefectVector, order: int,
                   mode: str = "symmetry", method: str = "auto",
                   span_filter: Iterable[int] | None = None) -> ClusterSeries:
    """Clusters of total size <= order, summed exactly and broken down by size.

    ``direct`` sums over every cluster.  ``symmetry`` sums only clusters whose
    support meets a fixed vertex of each occurring parity class, weighting each
    by 2^{d-1}/|support|; translations by even vectors act transitively on
    each class and preserve weights, so the two agree exactly.
    """
    if order > MAX_ORDER:
        raise BudgetExceeded(f"order {order} exceeds {MAX_ORDER}")
    system = polymer_system(params.d, defects, order)
    span = None if span_filter is None else frozenset(span_filter)
    lam, p = params.lam, params.p
    if mode == "direct":
        if method == "auto":
            method = "tuples" if order <= 3 else "multisets"
        if method == "tuples":
            return _series_from_tuples(system, lam, p, order, span)
        return _series_from_multisets(system, lam, p, order, span, None, None)
    if mode == "symmetry":
        total = ClusterSeries(order)
        for r in system.roots():
            part = _series_from_multisets(system, lam, p, order, span,
                                          2 ** (params.d - 1), r)
            for s, v in part.terms.items():
                total.add(s, v["count"], v["weight_sum"], part.abs_terms[s])
        return total
    raise ValueError(f"unknown mode {mode!r}")


def truncated_log_Xi(params: ModelParams, defects: DefectVector | None = None,
                     order: int = 2, mode: str = "symmetry") -> Fraction:
    defects = defects or DefectVector.uniform(params.k)
    return cluster_series(params, defects, order, mode).total


def alpha1(params: ModelParams) -> Fraction:
    return 1 - params.lam * params.p / (1 + params.lam)


def alpha2(params: ModelParams) -> Fraction:
    lam, q = params.lam, params.q
    return (1 + ((1 + lam) ** 2 - 1) * q) / (1 + lam) ** 2


def a_same_a_diff(params: ModelParams) -> tuple[Fraction, Fraction]:
    d, lam, p = params.d, params.lam, params.p
    q = 1 - p
    a1, a2 = alpha1(params), alpha2(params)
    same = 2 ** (d - 1) * lam ** 2 * (a2 ** d - a1 ** (2 * d))
    diff = 2 ** (d - 1) * d * lam ** 4 * a1 ** (2 * d) * q * (1 - q) / (1 + lam * q) ** 2
    return same, diff


def a_same_a_diff_enumerated(params: ModelParams, mode: str = "direct") -> tuple[Fraction, Fraction]:
    """Size-2 clusters spanning both coordinates, for sides (E,E) and (E,O)."""
    vals = []
    for sides in ((EVEN, EVEN), (EVEN, ODD)):
        series = cluster_series(params.with_(k=2), DefectVector(sides), 2, mode,
                                span_filter={0, 1})
        vals.append(series.size_sum(2))
    return vals[0], vals[1]


def sigma_squared(params: ModelParams) -> Fraction:
    d, lam, p = params.d, params.lam, params.p
    a1, a2 = alpha1(params), alpha2(params)
    return Fraction(1, 4) * 2 ** d * lam ** 2 * (
        a2 ** d + (p * (1 - p) * lam ** 2 * d / (1 + lam - p * lam) ** 2 - 1) * a1 ** (2 * d))


def second_order_coefficient(params: ModelParams) -> Fraction:
    """The constant a with f_2 = lam^2 (a * C(d,2) - 1/4)."""
    lam, q = params.lam, params.q
    return (1 + lam) ** 2 * (1 + lam * q ** 2) ** 2 / (4 * (1 + lam * q) ** 4) - Fraction(1, 4)


def closure_free_dimension(size: int, d_start: int = 2, d_stop: int = 12) -> int:
    """Smallest d from which no 2-linked set of at most ``size`` vertices has a large closure."""
    from .graph import closure, connected_sets_rooted
    for d in range(d_start, d_stop):
        g = build_hypercube(d)
        lim = closure_limit(d)
        evens = [v for v in range(g.vertex_count) if parity(v) == 0]
        adjacent = lambda u, d=d: (u ^ (1 << a) ^ (1 << b) for a in range(d) for b in range(a + 1, d))
        if all(closure(g, sum(1 << v for v in s)).bit_count() <= lim
               for s in connected_sets_rooted(adjacent, evens, 0, size)):
            return d
    raise BudgetExceeded("closure constraint binds on the whole searched range")


def lagrange_interpolate(xs: Sequence[int], ys: Sequence[Fraction]) -> list[Fraction]:
    """Coefficients (constant first) of the unique polynomial through the points, exactly."""
    n = len(xs)
    coeffs = [Fraction(0)] * n
    for i in range(n):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j in range(n):
            if j == i:
                continue
            nxt = [Fraction(0)] * (len(basis) + 1)
            for a, c in enumerate(basis):
                nxt[a] -= c * xs[j]
                nxt[a + 1] += c
            basis = nxt
            denom *= xs[i] - xs[j]
        for a, c in enumerate(basis):
            coeffs[a] += ys[i] * c / denom
    return coeffs


def poly_eval(coeffs: Sequence[Fraction], x) -> Fraction:
    out = Fraction(0)
    for c in reversed(coeffs):
        out = out * x + c
    return out


@dataclass
class CoefficientFit:
    index: int
    nodes: list[int]
    values: list[Fraction]
    coeffs: list[Fraction]
    check_node: int | None = None
    check_value: Fraction | None = None

    @property
    def check_passed(self) -> bool | None:
        if self.check_node is None:
            return None
        return poly_eval(self.coeffs, self.check_node) == self.check_value


def size_coefficient(params: ModelParams, size: int, d: int) -> Fraction:
    """Sum of cluster weights of one total size divided by 2^d alpha_1^{d*size}."""
    pd = params.with_(d=d, k=1)
    series = cluster_series(pd, DefectVector.uniform(1), size, "symmetry")
    return series.size_sum(size) / (2 ** d * alpha1(pd) ** (d * size))


def coefficient_polynomials(params: ModelParams, order: int,
                            with_check: bool = True) -> list[CoefficientFit]:
    """Recover f_i for i < order by exact interpolation in d.

    Interpolation nodes start at the first dimension where the closure limit
    no longer removes any set of the relevant size, so the per-size sums are
    genuinely polynomial in d there.
    """
    if order > MAX_ORDER:
        raise BudgetExceeded(f"order {order} exceeds {MAX_ORDER}")
    fits = []
    for i in range(1, order):
        d0 = max(closure_free_dimension(i), 2)
        nodes = list(range(d0, d0 + 2 * i - 1))
        values = [size_coefficient(params, i, d) for d in nodes]
        fit = CoefficientFit(i, nodes, values, lagrange_interpolate(nodes, values))
        if with_check:
            fit.check_node = nodes[-1] + 1
            fit.check_value = size_coefficient(params, i, fit.check_node)
        fits.append(fit)
    return fits


def span_weight(params: ModelParams, span_size: int, even_count: int, order: int,
                mode: str = "symmetry") -> Fraction:
    """Truncated sum of cluster weights with span exactly a given set.

    Clusters of the k-system with span S are the clusters of the |S|-system
    with full span, so only |S| and the number of EVEN sides inside S matter.
    """
    sides = (EVEN,) * even_count + (ODD,) * (span_size - even_count)
    series = cluster_series(params.with_(k=span_size), DefectVector(sides), order, mode,
                            span_filter=set(range(span_size)))
    return series.total


def covering_sequences(k: int, max_terms: int) -> Iterator[tuple[frozenset, ...]]:
    subsets = [frozenset(c) for r in range(2, k + 1) for c in itertools.combinations(range(k), r)]
    full = frozenset(range(k))
    for n in range(1, max_terms + 1):
        for seq in itertools.product(subsets, repeat=n):
            cover = frozenset()
            for s in seq:
                cover |= s
            if cover == full:
                yield seq


def central_moment_truncated(params: ModelParams, order: int,
                             max_terms: int | None = None) -> Fraction:
    """Normalized k-th central moment from truncated span weights.

    2^{-k} sum over side assignments D of sum over covering sequences
    (S_1..S_n) of subsets with |S_i| >= 2 of prod w(S_i; D) / n!.
    """
    k = params.k
    if k > 4 or order > MAX_ORDER:
        raise BudgetExceeded("central_moment_truncated supports k <= 4, order <= 4")
    max_terms = k if max_terms is None else max_terms
    cache: dict[tuple[int, int], Fraction] = {}

    def w(sub: frozenset, even_set: frozenset) -> Fraction:
        m = len(sub & even_set)
        key = (len(sub), max(m, len(sub) - m))
        if key not in cache:
            cache[key] = span_weight(params, key[0], key[1], order)
        return cache[key]

    seqs = list(covering_sequences(k, max_terms))
    total = Fraction(0)
    for r in range(k + 1):
        for evens in itertools.combinations(range(k), r):
            ev = frozenset(evens)
            for seq in seqs:
                prod = Fraction(1, math.factorial(len(seq)))
                for s in seq:
                    prod *= w(s, ev)
                total += prod
    return total / 2 ** k


def tail_diagnostic(params: ModelParams, order: int) -> float:
    """sum |w(cluster)| e^{size d^{-3/2}} over clusters up to ``order``, over 2^d alpha_1^d."""
    series = cluster_series(params.with_(k=1), DefectVector.uniform(1), order, "symmetry")
    d = params.d
    tot = sum(float(v) * math.exp(s * d ** -1.5) for s, v in series.abs_terms.items())
    return tot / (2 ** d * float(alpha1(params)) ** d)
