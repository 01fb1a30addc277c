from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from qdp.exact import ModelParams
from qdp.graph import EVEN, ODD, build_hypercube
from qdp.polymers import (SCENARIOS, DefectVector, Polymer, alpha_exact, closed_form_weight,
                          delta_exact, enumerate_polymers, incompatible, is_polymer,
                          polymer_weight_bruteforce, polymer_weight_factorized,
                          scenario_polymer, weight_upper_bound)

from oracles import polymer_weight_naive, polymers_naive

LAMS = [Fraction(1, 2), Fraction(1), Fraction(3)]
PS = [Fraction(0), Fraction(1, 2), Fraction(1)]


def test_defect_vector_parse_and_canonical():
    dv = DefectVector.parse("OEO")
    assert dv.sides == (ODD, EVEN, ODD)
    assert str(dv.canonical()) == "EEO"
    with pytest.raises(ValueError):
        DefectVector(())


def test_enumeration_examples():
    assert len(list(enumerate_polymers(3, DefectVector.uniform(1), 1))) == 4
    assert len(list(enumerate_polymers(3, DefectVector.uniform(1), 2, enforce_closure=False))) == 10
    # a distance-two pair in Q_3 has a closure of four vertices, above the limit of three
    assert len(list(enumerate_polymers(3, DefectVector.uniform(1), 2))) == 4


def test_two_coordinate_smallest_support():
    polys = [g for g in enumerate_polymers(4, DefectVector.uniform(2), 2)
             if g.support.bit_count() == 1 and g.size == 2]
    assert len(polys) == 8
    assert all(g.components[0] == g.components[1] for g in polys)


@pytest.mark.parametrize("d,sides,m", [(3, "E", 3), (3, "EE", 3), (3, "EO", 3), (4, "E", 3),
                                       (2, "EEO", 3), (3, "EOE", 2)])
def test_enumeration_matches_naive_filter(d, sides, m):
    g = build_hypercube(d)
    dv = DefectVector.parse(sides)
    got = list(enumerate_polymers(d, dv, m))
    assert len(got) == len(set(got))
    assert set(got) == polymers_naive(g, dv.sides, m)


@pytest.mark.parametrize("sides", ["E", "EE", "EO"])
def test_rooted_enumeration_partitions_total(sides):
    dv = DefectVector.parse(sides)
    total = list(enumerate_polymers(4, dv, 3))
    by_root = [g for r in range(16) for g in enumerate_polymers(4, dv, 3, root=r)]
    assert sorted(by_root, key=repr) == sorted(total, key=repr)


def test_is_polymer_rejects_wrong_side():
    g = build_hypercube(3)
    assert not is_polymer(g, DefectVector.uniform(1), Polymer.of([1]))
    assert is_polymer(g, DefectVector((ODD,)), Polymer.of([1]))


def test_incompatibility_examples():
    a = Polymer.of([0])
    assert incompatible(a, a)
    assert not incompatible(a, Polymer.of([0b1111]))
    assert incompatible(a, Polymer.of([0b11]))


def test_weight_examples():
    assert polymer_weight_factorized(build_hypercube(2), Polymer.of([0]), 1, Fraction(1, 2)) == Fraction(9, 16)
    for d in (2, 3, 5):
        assert polymer_weight_factorized(build_hypercube(d), Polymer.of([0]), 1, 1) == Fraction(1, 2 ** d)
    gamma, _ = scenario_polymer("IV", 2)
    prm = ModelParams(2, 2, 1, 1)
    assert polymer_weight_bruteforce(build_hypercube(2), gamma, 1, 1) == closed_form_weight("IV", prm)


def test_closed_form_examples():
    assert closed_form_weight("I", ModelParams(3, 1, 1, 1)) == Fraction(1, 8)
    assert closed_form_weight("II", ModelParams(5, 1, Fraction(7, 3), 0)) == Fraction(49, 9)
    for d in (2, 3, 6):
        # hard-core limit: only the empty decoration survives
        assert closed_form_weight("IV", ModelParams(d, 2, 1, 1)) == Fraction(1, 2 ** (2 * d - 2)) * Fraction(1, 4)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("scenario", SCENARIOS)
def test_closed_forms_match_factorized(d, scenario):
    g = build_hypercube(d)
    for k in ((1,) if scenario in ("I", "II") else (2, 3) if scenario == "III" else (2,)):
        gamma, _ = scenario_polymer(scenario, d, k)
        for lam in LAMS:
            for p in PS + [Fraction(3, 4)]:
                assert polymer_weight_factorized(g, gamma, lam, p) == \
                    closed_form_weight(scenario, ModelParams(d, k, lam, p))


@pytest.mark.parametrize("d,sides", [(2, "E"), (2, "EO"), (3, "E"), (3, "EE"), (3, "EO"), (2, "EEO")])
def test_weights_match_naive_decoration_sum(d, sides):
    g = build_hypercube(d)
    for gamma in enumerate_polymers(d, DefectVector.parse(sides), 2):
        for lam, p in ((Fraction(1, 2), Fraction(1, 3)), (Fraction(2), Fraction(1))):
            naive = polymer_weight_naive(g, gamma.components, lam, p)
            assert polymer_weight_bruteforce(g, gamma, lam, p) == naive
            assert polymer_weight_factorized(g, gamma, lam, p) == naive


@given(st.sampled_from(["E", "EE", "EO", "EEO", "EOO", "OO"]), st.sampled_from(LAMS),
       st.sampled_from(PS + [Fraction(1, 4)]), st.integers(0, 10**6))
def test_factorized_equals_bruteforce_sampled(sides, lam, p, pick):
    polys = list(enumerate_polymers(3, DefectVector.parse(sides), 3))
    gamma = polys[pick % len(polys)]
    g = build_hypercube(3)
    assert polymer_weight_factorized(g, gamma, lam, p) == polymer_weight_bruteforce(g, gamma, lam, p)


@pytest.mark.parametrize("sides", ["E", "EE", "EEE"])
def test_upper_bound_dominates(sides):
    g = build_hypercube(4)
    for gamma in enumerate_polymers(4, DefectVector.parse(sides), 3):
        for lam in LAMS:
            for p in PS:
                w = polymer_weight_factorized(g, gamma, lam, p)
                bound = weight_upper_bound(g, gamma, lam, p)
                assert float(w) <= float(bound) * (1 + 1e-12)


def test_upper_bound_examples():
    g = build_hypercube(4)
    single = Polymer.of([0])
    lam, p = Fraction(2), Fraction(1, 3)
    assert weight_upper_bound(g, single, lam, p) == polymer_weight_factorized(g, single, lam, p)
    gamma, _ = scenario_polymer("III", 4, 2)
    assert weight_upper_bound(g, gamma, lam, p) > polymer_weight_factorized(g, gamma, lam, p)
    assert weight_upper_bound(g, gamma, lam, 0) == pytest.approx(float(lam) ** 2)


def test_delta_superadditivity_exact():
    for lam in LAMS + [Fraction(5, 2)]:
        for p in PS + [Fraction(1, 4), Fraction(3, 4)]:
            for n in range(7):
                for m in range(n + 1):
                    for ell in range(m + 1):
                        assert delta_exact(m, lam, p) * delta_exact(n, lam, p) <= \
                            delta_exact(m - ell, lam, p) * delta_exact(n + ell, lam, p)


def test_alpha_delta_relation():
    for ell in range(1, 6):
        lam, p = Fraction(3, 2), Fraction(2, 7)
        assert delta_exact(ell, lam, p) == alpha_exact(ell, lam, p) * (1 + lam) ** ell
