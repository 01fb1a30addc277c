"""Polymers of the k-system on Q_d: enumeration, exact weights, bounds.

A polymer for a defect vector ``sides`` (one parity class per coordinate)
is a tuple of vertex sets (A_1, ..., A_k) with A_i inside class sides[i],
small closures, and a connected auxiliary graph H on the pairs (i, u):
(i, u) ~ (i, w) when u, w are at distance two, and (i, u) ~ (j, w) for
i != j when u, w are equal or adjacent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .exact import ModelParams, as_fraction
from .graph import (EVEN, ODD, BudgetExceeded, Graph, build_hypercube,
                    closure, connected_sets_rooted, members, neighborhood, parity, vset)

DEFAULT_MAX_SIZE = 4
BRUTE_FORCE_ITEMS = 24


@dataclass(frozen=True)
class DefectVector:
    sides: tuple[int, ...]

    def __post_init__(self):
        if len(self.sides) < 1 or any(s not in (EVEN, ODD) for s in self.sides):
            raise ValueError("defect vector needs k >= 1 entries in {EVEN, ODD}")

    @staticmethod
    def parse(text: str) -> "DefectVector":
        table = {"E": EVEN, "O": ODD}
        return DefectVector(tuple(table[c] for c in text.upper()))

    @staticmethod
    def uniform(k: int, side: int = EVEN) -> "DefectVector":
        return DefectVector((side,) * k)

    @property
    def k(self) -> int:
        return len(self.sides)

    @property
    def even_count(self) -> int:
        return sum(1 for s in self.sides if s == EVEN)

    def canonical(self) -> "DefectVector":
        """Representative with the EVEN entries first and at least half EVEN."""
        m = self.even_count
        m = max(m, self.k - m)
        return DefectVector((EVEN,) * m + (ODD,) * (self.k - m))

    def __str__(self) -> str:
        return "".join("E" if s == EVEN else "O" for s in self.sides)


@dataclass(frozen=True)
class Polymer:
    components: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def size(self) -> int:
        return sum(a.bit_count() for a in self.components)

    @property
    def support(self) -> int:
        s = 0
        for a in self.components:
            s |= a
        return s

    @property
    def span(self) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.components) if a)

    def neighborhoods(self, g: Graph) -> list[int]:
        return [neighborhood(g, a) for a in self.components]

    def neighborhood_size(self, g: Graph) -> int:
        return sum(n.bit_count() for n in self.neighborhoods(g))

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, u) for i, a in enumerate(self.components) for u in members(a)]

    def union(self, other: "Polymer") -> "Polymer":
        if self.k != other.k:
            raise ValueError("polymers from different k-systems")
        return Polymer(tuple(a | b for a, b in zip(self.components, other.components)))

    def to_json(self, defects: DefectVector | None = None) -> dict:
        out = {"k": self.k, "components": [members(a) for a in self.components]}
        if defects is not None:
            out["defects"] = str(defects)
        return out

    @staticmethod
    def of(*components: Sequence[int]) -> "Polymer":
        return Polymer(tuple(vset(c) for c in components))


def h_connected(gamma: Polymer) -> bool:
    """Connectivity of the auxiliary graph on (coordinate, vertex) pairs."""
    nodes = gamma.pairs()
    if not nodes:
        return False
    seen = {nodes[0]}
    stack = [nodes[0]]
    rest = set(nodes[1:])
    while stack:
        i, u = stack.pop()
        linked = []
        for j, w in rest:
            dist = (u ^ w).bit_count()
            if (i == j and dist == 2) or (i != j and dist <= 1):
                linked.append((j, w))
        for node in linked:
            rest.discard(node)
            seen.add(node)
            stack.append(node)
    return not rest


def closure_limit(d: int) -> Fraction:
    return Fraction(3, 4) * 2 ** (d - 1)


def is_polymer(g: Graph, defects: DefectVector, gamma: Polymer,
               enforce_closure: bool = True) -> bool:
    if gamma.k != defects.k:
        return False
    for a, side in zip(gamma.components, defects.sides):
        if a & ~g.side_mask(side):
            return False
    if not h_connected(gamma):
        return False
    if enforce_closure:
        lim = closure_limit(g.dim)
        if any(closure(g, a).bit_count() > lim for a in gamma.components if a):
            return False
    return True


def incompatible(g1: Polymer, g2: Polymer) -> bool:
    return h_connected(g1.union(g2))


def _support_neighbors(d: int, mixed: bool):
    def adjacent(u):
        for i in range(d):
            if mixed:
                yield u ^ (1 << i)
            for j in range(i + 1, d):
                yield u ^ (1 << i) ^ (1 << j)
    return adjacent


def enumerate_polymers(d: int, defects: DefectVector, max_size: int,
                       root: int | None = None, enforce_closure: bool = True,
                       size_budget: int = DEFAULT_MAX_SIZE + 1) -> Iterator[Polymer]:
    """Every polymer with total size at most ``max_size``, each exactly once.

    Supports are grown as connected sets (distance two, plus distance one when
    both classes occur in ``sides``) rooted at their minimum vertex; each
    support vertex is then given a non-empty set of coordinates of its class.
    With ``root`` set, only supports whose minimum vertex is ``root`` appear.
    """
    if max_size > size_budget:
        raise BudgetExceeded(f"max_size {max_size} exceeds polymer budget {size_budget}")
    g = build_hypercube(d)
    k = defects.k
    by_side = {s: [i for i in range(k) if defects.sides[i] == s] for s in (EVEN, ODD)}
    classes = set(defects.sides)
    allowed = [v for v in range(g.vertex_count) if parity(v) in classes]
    adjacent = _support_neighbors(d, len(classes) == 2)
    roots = allowed if root is None else [root]
    coord_choices = {}
    for s in (EVEN, ODD):
        idx = by_side[s]
        coord_choices[s] = [c for r in range(1, len(idx) + 1)
                            for c in itertools.combinations(idx, r)]
    lim = closure_limit(d)
    closure_cache: dict[int, bool] = {}

    def small_closure(a: int) -> bool:
        ok = closure_cache.get(a)
        if ok is None:
            ok = closure_cache[a] = closure(g, a).bit_count() <= lim
        return ok

    for r in roots:
        if parity(r) not in classes:
            continue
        for support in connected_sets_rooted(adjacent, allowed, r, max_size):
            options = [coord_choices[parity(u)] for u in support]
            for pick in itertools.product(*options):
                if sum(len(c) for c in pick) > max_size:
                    continue
                comps = [0] * k
                for u, coords in zip(support, pick):
                    for i in coords:
                        comps[i] |= 1 << u
                gamma = Polymer(tuple(comps))
                if not h_connected(gamma):
                    continue
                if enforce_closure and not all(small_closure(a) for a in comps if a):
                    continue
                yield gamma


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def polymer_weight_bruteforce(g: Graph, gamma: Polymer, lam, p) -> Fraction:
    """Sum over all decorations B_i ⊆ N(A_i), tabulated by (sum |B_i|, |∪ E(A_i, B_i)|)."""
    lam, p = as_fraction(lam), as_fraction(p)
    q = 1 - p
    items = []
    edge_ids: dict[tuple[int, int], int] = {}
    for a, na in zip(gamma.components, gamma.neighborhoods(g)):
        for b in members(na):
            mask = 0
            for u in members(a & g.adjacency[b]):
                e = _edge_key(u, b)
                idx = edge_ids.setdefault(e, len(edge_ids))
                mask |= 1 << idx
            items.append(mask)
    if len(items) > BRUTE_FORCE_ITEMS:
        raise BudgetExceeded(f"{len(items)} decoration slots exceed 2^{BRUTE_FORCE_ITEMS} terms")
    if len(edge_ids) > 62:
        raise BudgetExceeded("too many distinct decoration edges")
    ors = np.zeros(1, dtype=np.int64)
    sizes = np.zeros(1, dtype=np.int64)
    for mask in items:
        ors = np.concatenate([ors, ors | mask])
        sizes = np.concatenate([sizes, sizes + 1])
    ecount = np.bitwise_count(ors.astype(np.uint64)).astype(np.int64)
    table = np.zeros((len(items) + 1, len(edge_ids) + 1), dtype=np.int64)
    np.add.at(table, (sizes, ecount), 1)
    total = Fraction(0)
    for s, e in zip(*np.nonzero(table)):
        total += int(table[s, e]) * lam ** int(s) * q ** int(e)
    return lam ** gamma.size * total / (1 + lam) ** len(items)


def polymer_weight_factorized(g: Graph, gamma: Polymer, lam, p) -> Fraction:
    """Exact weight as a product of local factors.

    Outside the support each neighborhood vertex contributes an independent
    factor.  Support vertices that are also neighbors of another coordinate
    (only possible when both classes occur) share edges with each other, so
    they are summed jointly.
    """
    lam, p = as_fraction(lam), as_fraction(p)
    q = 1 - p
    comps = gamma.components
    nbhd = gamma.neighborhoods(g)
    support = gamma.support
    touched = 0
    for n in nbhd:
        touched |= n
    weight = lam ** gamma.size / (1 + lam) ** sum(n.bit_count() for n in nbhd)
    coupled = []
    for v in members(touched):
        tv = [i for i, n in enumerate(nbhd) if (n >> v) & 1]
        if (support >> v) & 1:
            coupled.append((v, tv))
            continue
        fv = Fraction(0)
        for r in range(len(tv) + 1):
            for sub in itertools.combinations(tv, r):
                u = 0
                for i in sub:
                    u |= comps[i]
                fv += lam ** r * q ** (g.adjacency[v] & u).bit_count()
        weight *= fv
    if coupled:
        choices = [[sub for r in range(len(tv) + 1) for sub in itertools.combinations(tv, r)]
                   for _, tv in coupled]
        joint = Fraction(0)
        for pick in itertools.product(*choices):
            used = set()
            nsel = 0
            for (v, _), sub in zip(coupled, pick):
                nsel += len(sub)
                u = 0
                for i in sub:
                    u |= comps[i]
                for a in members(g.adjacency[v] & u):
                    used.add(_edge_key(a, v))
            joint += lam ** nsel * q ** len(used)
        weight *= joint
    return weight


def alpha_exact(ell: int, lam, p) -> Fraction:
    lam, p = as_fraction(lam), as_fraction(p)
    return (1 + ((1 + lam) ** ell - 1) * (1 - p)) / (1 + lam) ** ell


def delta_exact(ell: int, lam, p) -> Fraction:
    lam, p = as_fraction(lam), as_fraction(p)
    return 1 + ((1 + lam) ** ell - 1) * (1 - p)


def weight_upper_bound(g: Graph, gamma: Polymer, lam, p):
    """lam^{size} * (alpha_k^{1/k})^{sum |N(A_i)|}; exact when k = 1."""
    k = gamma.k
    a = alpha_exact(k, lam, p)
    nsize = gamma.neighborhood_size(g)
    lam = as_fraction(lam)
    if k == 1:
        return lam ** gamma.size * a ** nsize
    return float(lam) ** gamma.size * float(a) ** (nsize / k)


SCENARIOS = ("I", "II", "III", "IV")


def scenario_polymer(scenario: str, d: int, k: int = 1) -> tuple[Polymer, DefectVector]:
    """A representative polymer for each small shape with a closed-form weight."""
    if scenario == "I":
        return Polymer((1 << 0,)), DefectVector((EVEN,))
    if scenario == "II":
        if d < 2:
            raise ValueError("scenario II needs d >= 2")
        return Polymer(((1 << 0) | (1 << 3),)), DefectVector((EVEN,))
    if scenario == "III":
        return Polymer((1 << 0,) * k), DefectVector((EVEN,) * k)
    if scenario == "IV":
        return Polymer((1 << 0, 1 << 1)), DefectVector((EVEN, ODD))
    raise ValueError(f"unknown scenario {scenario!r}")


def closed_form_weight(scenario: str, params: ModelParams) -> Fraction:
    lam, q, d, k = params.lam, params.q, params.d, params.k
    a1 = (1 + lam * q) / (1 + lam)
    if scenario == "I":
        return lam * a1 ** d
    if scenario == "II":
        return lam ** 2 * a1 ** (2 * d - 2) * ((1 + lam * q ** 2) / (1 + lam * q)) ** 2
    if scenario == "III":
        return lam ** k * alpha_exact(k, lam, params.p) ** d
    if scenario == "IV":
        return lam ** 2 * a1 ** (2 * d - 2) * (1 + 2 * lam * q + lam ** 2 * q) / (1 + lam) ** 2
    raise ValueError(f"unknown scenario {scenario!r}")
