import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdp.exact import (Budgets, LogScalar, ModelParams, as_fraction, bipartite_hardcore_table,
                       count_independent_sets, frac_str, hardcore_on_sample_logZ,
                       hardcore_partition, hypercube_postemp_logZ, ksystem_partition,
                       postemp_partition, sample_hardcore_exact)
from qdp.graph import EVEN, ODD, BudgetExceeded, Graph, build_hypercube, sample_subgraph

from oracles import (hardcore_brute, independent_set_count, ksystem_brute, postemp_brute,
                     random_subgraph_moment_brute)

K2 = Graph.from_edges(2, [(0, 1)])
K1 = Graph.from_edges(1, [])
GRID = [Fraction(x) for x in ("0", "1/4", "1/2", "3/4", "1")]


def test_as_fraction_parses_strings():
    assert as_fraction("3/4") == Fraction(3, 4)
    assert as_fraction(2) == 2
    with pytest.raises(ValueError):
        ModelParams(3, 1, 1, "5/4")
    with pytest.raises(ValueError):
        ModelParams(3, 1, 0, "1/2")


def test_frac_str():
    assert frac_str(Fraction(3, 4)) == "3/4"
    assert frac_str(Fraction(2)) == "2/1"


def test_logscalar_arithmetic():
    a, b = LogScalar.of(3), LogScalar.of(5)
    assert math.isclose((a + b).to_float(), 8)
    assert math.isclose((a * b).to_float(), 15)
    assert (LogScalar.zero() + a).to_float() == pytest.approx(3)


@pytest.mark.parametrize("d,n", [(1, 3), (2, 7), (3, 35)])
def test_small_independent_set_counts(d, n):
    g = build_hypercube(d)
    assert count_independent_sets(g) == n == independent_set_count(g)


def test_q4_count_matches_bruteforce():
    g = build_hypercube(4)
    assert count_independent_sets(g) == independent_set_count(g) == 743


def test_hardcore_examples():
    lam = Fraction(3, 7)
    assert hardcore_partition(K2, lam) == 1 + 2 * lam
    assert hardcore_partition(K1, lam) == 1 + lam
    assert hardcore_partition(build_hypercube(2), 1) == 7


def test_postemp_examples():
    lam, p = Fraction(2), Fraction(1, 3)
    assert postemp_partition(K2, lam, p) == 1 + 2 * lam + lam ** 2 * (1 - p)
    g = build_hypercube(3)
    assert postemp_partition(g, lam, 0) == (1 + lam) ** 8
    assert postemp_partition(g, 1, Fraction(1, 2)) == postemp_brute(g, 1, Fraction(1, 2))


def test_postemp_q4_bipartite_matches_bruteforce():
    g = build_hypercube(4)
    lam, p = Fraction(1, 2), Fraction(3, 4)
    assert postemp_partition(g, lam, p) == postemp_brute(g, lam, p)
    assert postemp_partition(g, lam, p, side=ODD) == postemp_partition(g, lam, p, side=EVEN)


def test_ksystem_examples():
    lam, p = Fraction(3, 2), Fraction(2, 5)
    assert ksystem_partition(K2, ModelParams(1, 1, lam, p)) == postemp_partition(K2, lam, p)
    expected = p * (1 + 2 * lam) ** 2 + (1 - p) * (1 + lam) ** 4
    for alg in ("direct", "edge_subsets"):
        assert ksystem_partition(K2, ModelParams(1, 2, lam, p), alg) == expected
    g = build_hypercube(3)
    assert ksystem_partition(g, ModelParams(3, 2, lam, 1)) == hardcore_partition(g, lam) ** 2


def _random_graph(rng, n, m):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return Graph.from_edges(n, rng.sample(pairs, m))


@pytest.mark.parametrize("seed", range(6))
def test_ksystem_matches_naive_oracles(seed):
    rng = random.Random(seed)
    g = _random_graph(rng, 4, rng.randint(0, 6))
    for k in (1, 2):
        lam, p = Fraction(rng.randint(1, 4), 2), rng.choice(GRID)
        prm = ModelParams(1, k, lam, p)
        brute = ksystem_brute(g, k, lam, p)
        assert ksystem_partition(g, prm, "direct") == brute
        assert ksystem_partition(g, prm, "edge_subsets") == brute
        assert random_subgraph_moment_brute(g, k, lam, p) == brute


def test_q4_second_moment_both_algorithms():
    g = build_hypercube(4)
    prm = ModelParams(4, 2, 1, Fraction(1, 2))
    assert ksystem_partition(g, prm, "direct") == ksystem_partition(g, prm, "edge_subsets")


def test_ksystem_unknown_algorithm():
    with pytest.raises(ValueError):
        ksystem_partition(K2, ModelParams(1, 1, 1, 0), "magic")


@given(st.integers(1, 3), st.sampled_from(GRID[:-1]), st.sampled_from(GRID[1:]),
       st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(2)]))
def test_ksystem_monotone_in_retention(k, p_lo, p_hi, lam):
    if p_lo >= p_hi:
        p_lo, p_hi = p_hi, p_lo
    if p_lo == p_hi:
        return
    g = build_hypercube(2)
    assert ksystem_partition(g, ModelParams(2, k, lam, p_lo)) >= \
        ksystem_partition(g, ModelParams(2, k, lam, p_hi))


@given(st.sampled_from(GRID), st.sampled_from([Fraction(1, 3), Fraction(1), Fraction(5, 2)]))
def test_side_swap_invariance(p, lam):
    g = build_hypercube(3)
    h = g.swapped()
    assert postemp_partition(g, lam, p) == postemp_partition(h, lam, p)
    assert hardcore_partition(g, lam) == hardcore_partition(h, lam)
    assert ksystem_partition(g, ModelParams(3, 2, lam, p)) == ksystem_partition(h, ModelParams(3, 2, lam, p))


def test_hypercube_logz_examples():
    assert hypercube_postemp_logZ(ModelParams(3, 1, 1, 1)).log2_value == pytest.approx(math.log2(35), rel=1e-13)
    assert hypercube_postemp_logZ(ModelParams(5, 1, 1, 0)).log2_value == pytest.approx(32, rel=1e-14)
    exact = postemp_partition(build_hypercube(5), 1, Fraction(1, 2))
    val = hypercube_postemp_logZ(ModelParams(5, 1, 1, Fraction(1, 2))).log2_value
    assert val == pytest.approx(math.log2(exact), rel=1e-12)


@pytest.mark.parametrize("lam,p", [("1/2", "1/3"), ("3", "9/10"), ("1", "1/2")])
def test_gray_postemp_agrees_with_exact_q4(lam, p):
    exact = postemp_partition(build_hypercube(4), lam, p)
    prm = ModelParams(4, 1, lam, p)
    for side in (EVEN, ODD):
        for workers in (1, 4):
            val = hypercube_postemp_logZ(prm, workers, side).log2_value
            assert val == pytest.approx(math.log2(exact), rel=1e-13)


def test_hardcore_histogram_segments_agree():
    g = build_hypercube(4)
    tables = [bipartite_hardcore_table(g, EVEN, w) for w in (1, 2, 4, 16)]
    for t in tables[1:]:
        assert np.array_equal(t, tables[0])


def test_sample_examples():
    g3 = build_hypercube(3)
    assert sample_hardcore_exact(sample_subgraph(g3, 1, 0, 0)) == 35
    for d in (2, 4):
        s = sample_subgraph(build_hypercube(d), 0, 0, 0)
        assert hardcore_on_sample_logZ(s).log2_value == pytest.approx(2 ** d)
    g2 = build_hypercube(2)
    keep = np.array([e not in ((0, 1), (2, 3)) for e in g2.edge_list])
    s = sample_subgraph(g2, Fraction(1, 2), 0, 0)
    s = type(s)(g2, keep, 0, 0, Fraction(1, 2))
    assert sample_hardcore_exact(s) == hardcore_brute(s.as_graph(), 1) == 9


@pytest.mark.parametrize("d", [3, 4, 5])
def test_layered_kernel_matches_gray(d):
    g = build_hypercube(d)
    for i in range(8):
        s = sample_subgraph(g, Fraction(3, 5), 17, i)
        a = hardcore_on_sample_logZ(s, Fraction(3, 2), "gray").log2_value
        b = hardcore_on_sample_logZ(s, Fraction(3, 2), "layered").log2_value
        assert a == pytest.approx(b, rel=1e-13)


def test_budget_errors(monkeypatch):
    with pytest.raises(BudgetExceeded):
        postemp_partition(build_hypercube(6), 1, Fraction(1, 2))
    monkeypatch.setenv("QDP_BUDGETS", '{"edge_subsets_bits": 4}')
    assert Budgets.current().edge_subsets_bits == 4
    with pytest.raises(BudgetExceeded):
        ksystem_partition(Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]),
                          ModelParams(1, 1, 1, Fraction(1, 2)), "edge_subsets")


def test_hypercube_logz_rejects_large_d():
    with pytest.raises(ValueError):
        hypercube_postemp_logZ(ModelParams(7, 1, 1, 1))
