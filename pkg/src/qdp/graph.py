"""Graph substrate: hypercubes, general small graphs, vertex-set algebra on
integer bitmasks, closures, 2-linked structure and seeded edge sampling.

Vertex sets are plain Python ints used as bit vectors (bit ``v`` set iff
vertex ``v`` is a member); cardinality is ``int.bit_count``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_HYPERCUBE_DIM = 24
MAX_GENERAL_VERTICES = 24

EVEN = 0
ODD = 1


class BudgetExceeded(RuntimeError):
    """Raised when a requested enumeration exceeds a configured budget."""


def vset(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def members(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def popcount(mask: int) -> int:
    return mask.bit_count()


def parity(v: int) -> int:
    return v.bit_count() & 1


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with canonical (sorted) edge order.

    ``adjacency[v]`` is the neighbor bitmask of ``v``.  ``bipartition`` is an
    optional pair of bitmasks (even class, odd class).  ``dim`` is set only
    for hypercubes.
    """

    vertex_count: int
    edge_list: tuple[tuple[int, int], ...]
    adjacency: tuple[int, ...]
    bipartition: tuple[int, int] | None = None
    dim: int | None = None
    _edge_index: dict = field(default=None, compare=False, repr=False, hash=False)

    @staticmethod
    def from_edges(n: int, edges: Iterable[Sequence[int]],
                   bipartition: tuple[int, int] | None = None) -> "Graph":
        if not 0 <= n <= MAX_GENERAL_VERTICES:
            raise ValueError(f"general graphs support at most {MAX_GENERAL_VERTICES} vertices")
        pairs = set()
        for u, v in edges:
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            pairs.add((min(u, v), max(u, v)))
        edge_list = tuple(sorted(pairs))
        adj = [0] * n
        for u, v in edge_list:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        if bipartition is not None:
            ev, od = bipartition
            if ev & od or (ev | od) != (1 << n) - 1:
                raise ValueError("bipartition must partition the vertex set")
            for u, v in edge_list:
                if ((ev >> u) & 1) == ((ev >> v) & 1):
                    raise ValueError("edge inside a bipartition class")
        return Graph(n, edge_list, tuple(adj), bipartition)

    @property
    def edge_count(self) -> int:
        return len(self.edge_list)

    @property
    def all_vertices(self) -> int:
        return (1 << self.vertex_count) - 1

    def edge_index(self, u: int, v: int) -> int:
        idx = self._edge_index
        if idx is None:
            idx = {e: i for i, e in enumerate(self.edge_list)}
            object.__setattr__(self, "_edge_index", idx)
        return idx[(min(u, v), max(u, v))]

    def degree(self, v: int) -> int:
        return self.adjacency[v].bit_count()

    def side_mask(self, side: int) -> int:
        if self.bipartition is None:
            raise ValueError("graph has no bipartition")
        return self.bipartition[side]

    def swapped(self) -> "Graph":
        """Same graph with the two bipartition classes exchanged."""
        if self.bipartition is None:
            raise ValueError("graph has no bipartition")
        ev, od = self.bipartition
        return Graph(self.vertex_count, self.edge_list, self.adjacency, (od, ev), self.dim)

    def to_json(self) -> dict:
        out = {"vertices": self.vertex_count, "edges": [list(e) for e in self.edge_list]}
        if self.bipartition is not None:
            out["bipartition"] = [members(self.bipartition[0]), members(self.bipartition[1])]
        if self.dim is not None:
            out["dim"] = self.dim
        return out

    @staticmethod
    def from_json(obj: dict | str) -> "Graph":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if obj.get("dim") is not None:
            return build_hypercube(int(obj["dim"]))
        bip = obj.get("bipartition")
        if bip is not None:
            bip = (vset(bip[0]), vset(bip[1]))
        return Graph.from_edges(int(obj["vertices"]), obj["edges"], bip)


def build_hypercube(d: int) -> Graph:
    if not 1 <= d <= MAX_HYPERCUBE_DIM:
        raise ValueError(f"d must be in [1, {MAX_HYPERCUBE_DIM}], got {d}")
    n = 1 << d
    adj = []
    edges = []
    for u in range(n):
        row = 0
        for j in range(d):
            v = u ^ (1 << j)
            row |= 1 << v
            if u < v:
                edges.append((u, v))
        adj.append(row)
    edges.sort()
    even = 0
    for u in range(n):
        if not parity(u):
            even |= 1 << u
    return Graph(n, tuple(edges), tuple(adj), (even, ((1 << n) - 1) ^ even), d)


def neighborhood(g: Graph, s: int) -> int:
    out = 0
    adj = g.adjacency
    while s:
        low = s & -s
        out |= adj[low.bit_length() - 1]
        s ^= low
    return out


def closure(g: Graph, s: int) -> int:
    """All vertices whose neighborhood lies inside N(s)."""
    ns = neighborhood(g, s)
    out = 0
    for v, row in enumerate(g.adjacency):
        if row & ~ns == 0:
            out |= 1 << v
    return out


def _distance_two(g: Graph, u: int, w: int) -> bool:
    if g.dim is not None:
        return (u ^ w).bit_count() == 2
    if u == w or (g.adjacency[u] >> w) & 1:
        return False
    return (g.adjacency[u] & g.adjacency[w]) != 0


def _require_one_class(g: Graph, s: int) -> None:
    if g.bipartition is None:
        return
    ev, od = g.bipartition
    if s & ev and s & od:
        raise ValueError("vertex set straddles both bipartition classes")


def two_linked_components(g: Graph, s: int) -> list[int]:
    """Components of ``s`` under the distance-two adjacency."""
    _require_one_class(g, s)
    remaining = members(s)
    comps = []
    unseen = set(remaining)
    for start in remaining:
        if start not in unseen:
            continue
        unseen.discard(start)
        comp = 1 << start
        stack = [start]
        while stack:
            u = stack.pop()
            for w in list(unseen):
                if _distance_two(g, u, w):
                    unseen.discard(w)
                    comp |= 1 << w
                    stack.append(w)
        comps.append(comp)
    return comps


def distance_two_neighbors(g: Graph, v: int) -> list[int]:
    if g.dim is not None:
        d = g.dim
        return [v ^ (1 << i) ^ (1 << j) for i in range(d) for j in range(i + 1, d)]
    return [w for w in range(g.vertex_count) if _distance_two(g, v, w)]


def count_two_linked_sets(g: Graph, v: int, t: int, budget: int = 10**7) -> int:
    """Number of 2-linked sets inside v's class that contain ``v`` and have at most ``t`` vertices."""
    if t < 1:
        raise ValueError("t must be at least 1")
    seen = {1 << v}
    frontier = [1 << v]
    for _ in range(t - 1):
        nxt = []
        for s in frontier:
            for u in members(s):
                for w in distance_two_neighbors(g, u):
                    if (s >> w) & 1:
                        continue
                    s2 = s | (1 << w)
                    if s2 not in seen:
                        seen.add(s2)
                        nxt.append(s2)
                        if len(seen) > budget:
                            raise BudgetExceeded(f"more than {budget} 2-linked sets")
        frontier = nxt
    return len(seen)


def connected_sets_rooted(adjacent, vertices: Sequence[int], root: int, max_size: int) -> Iterator[tuple[int, ...]]:
    """Connected vertex sets with minimum element ``root`` (ESU enumeration).

    ``adjacent(u)`` yields the neighbors of ``u`` restricted to ``vertices``.
    Every connected set of size at most ``max_size`` whose smallest vertex is
    ``root`` is produced exactly once, as a tuple in insertion order.
    """
    allowed = set(vertices)
    if root not in allowed or max_size < 1:
        return

    def nbrs(u):
        return [w for w in adjacent(u) if w in allowed]

    def extend(sub, sub_set, closed, ext):
        yield tuple(sub)
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop()
            new_ext = list(ext)
            added = []
            for x in nbrs(w):
                if x > root and x not in sub_set and x not in closed:
                    new_ext.append(x)
                    added.append(x)
            sub.append(w)
            sub_set.add(w)
            closed_w = closed | set(added) | {w}
            yield from extend(sub, sub_set, closed_w, new_ext)
            sub.pop()
            sub_set.discard(w)

    start_ext = [w for w in nbrs(root) if w > root]
    yield from extend([root], {root}, set(start_ext) | {root}, start_ext)


@dataclass(frozen=True)
class SubgraphSample:
    base: Graph
    retained_edges: np.ndarray
    seed: int
    sample_index: int
    p: Fraction

    @property
    def retained_count(self) -> int:
        return int(self.retained_edges.sum())

    def as_graph(self) -> Graph:
        edges = [e for e, keep in zip(self.base.edge_list, self.retained_edges) if keep]
        g = Graph.from_edges(self.base.vertex_count, edges, self.base.bipartition) \
            if self.base.vertex_count <= MAX_GENERAL_VERTICES else None
        if g is None:
            raise ValueError("sample too large to materialize as a general graph")
        return g


def edge_uniforms(n_edges: int, seed: int, sample_index: int) -> np.ndarray:
    """Uniforms in [0,1) for each edge, from a Philox stream keyed by the seed.

    The counter's third word carries the sample index, so streams for
    different samples never overlap and any sample can be regenerated alone.
    """
    bitgen = np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF,
                              counter=[0, 0, sample_index & 0xFFFFFFFFFFFFFFFF, 0])
    return np.random.Generator(bitgen).random(n_edges)


def sample_subgraph(g: Graph, p, seed: int, sample_index: int) -> SubgraphSample:
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0,1]")
    u = edge_uniforms(g.edge_count, seed, sample_index)
    if p == 1:
        keep = np.ones(g.edge_count, dtype=bool)
    else:
        keep = u < float(p)
    keep.setflags(write=False)
    return SubgraphSample(g, keep, seed, sample_index, p)


def isoperimetric_profile(d: int, max_set: int) -> list[tuple[int, int]]:
    """Minimum |N(S)| over even-side S of each size up to ``max_set`` (exhaustive)."""
    from itertools import combinations

    g = build_hypercube(d)
    evens = members(g.bipartition[0])
    out = []
    for size in range(1, max_set + 1):
        best = math.inf
        # vertex-transitivity on the even side lets us fix the first vertex
        for rest in combinations(evens[1:], size - 1):
            s = 1 | vset(rest)
            best = min(best, neighborhood(g, s).bit_count())
        out.append((size, int(best)))
    return out
