import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qdp.asymptotics import (AlphaParams, alpha, alpha_tilde, central_moment_formula,
                             central_moment_lambda_one, classical_count, delta,
                             double_factorial, expectation_formula, expectation_lambda_one,
                             f_root, g_shape, gtilde, half_probability_expectation,
                             half_probability_variance, ks_jp_values, moment_ratio_formula,
                             second_order_a, second_order_a_exact, sigma2_float, threshold_p,
                             variance_ratio_lambda_one, x_star, xd_normalizer)
from qdp.exact import ModelParams

alphas = st.builds(AlphaParams, st.floats(0.05, 20), st.floats(0.01, 0.99))


def test_alpha_examples():
    ap = AlphaParams(1.0, 0.5)
    assert alpha(1, ap) == pytest.approx(0.75)
    assert alpha(2, ap) == pytest.approx(0.5 + 0.5 / 4)
    assert alpha(3, AlphaParams(2.0, 1.0)) == pytest.approx(1 / 27)
    assert delta(2, ap) == pytest.approx(alpha(2, ap) * 4)
    with pytest.raises(ValueError):
        alpha(0, ap)


def test_expectation_lambda_one_matches_general():
    for d in (10, 30, 60):
        for p in (0.5, 0.8, 1.0):
            a = expectation_formula(ModelParams(d, 1, 1, p), 2)
            b = expectation_lambda_one(d, p, 2)
            assert a.log2_value == pytest.approx(b.log2_value, rel=1e-12)


def test_classical_limit_is_sqrt_e():
    for d in (5, 12, 40):
        assert expectation_lambda_one(d, 1.0, 1).exponent == pytest.approx(0.5)
        second = expectation_lambda_one(d, 1.0, 2).exponent - 0.5
        assert second == pytest.approx(classical_count(d).details["relative_correction"])
    rep = classical_count(4)
    assert rep.log2_value == pytest.approx(9 + 0.5 / math.log(2))


def test_near_one_retention_limit():
    for c in (0.0, 0.5, 2.0):
        vals = [expectation_lambda_one(d, 1 - c / d, 1).exponent for d in (100, 1000, 10000)]
        errs = [abs(v - 0.5 * math.exp(c)) for v in vals]
        assert errs[-1] < 0.01 * math.exp(c)
        assert errs[0] >= errs[1] >= errs[2]


def test_simple_form_ratio_tends_to_one():
    # for p above 2 - sqrt 2 the size-two clusters become negligible
    for p in (0.7, 0.9):
        full = expectation_lambda_one(40, p, 2).exponent
        lead = 0.5 * (2 - p) ** 40
        assert abs(full - lead) < 1e-3 * lead


def test_second_order_constant_at_half():
    assert second_order_a_exact(Fraction(1), Fraction(1, 2)) == Fraction(19, 324)
    assert second_order_a(1.0, 0.5) == pytest.approx(19 / 324)
    assert second_order_a_exact(Fraction(2), Fraction(0)) == 0


def test_half_probability_expectation_consistent():
    for d in (10, 20, 30):
        a = expectation_lambda_one(d, 0.5, 2)
        b = half_probability_expectation(d)
        assert a.log2_value == pytest.approx(b.log2_value, rel=1e-13)
        printed = half_probability_expectation(d, Fraction(91, 9))
        print(f"d={d} coefficient 19/81 vs 91/9 exponent: {b.exponent:.6g} vs {printed.exponent:.6g}")


@pytest.mark.parametrize("d", [20, 30, 40])
def test_half_probability_variance_from_mean_and_ratio(d):
    mean = half_probability_expectation(d)
    ratio = moment_ratio_formula(ModelParams(d, 2, 1, 0.5))
    r = ratio.log2_value
    from_parts = 2 * mean.log2_value + r + math.log2(-math.expm1(-r * math.log(2)))
    assert half_probability_variance(d).log2_value == pytest.approx(from_parts, rel=1e-13)


def test_moment_ratio_deterministic_limit():
    for k in (2, 3, 4):
        assert moment_ratio_formula(ModelParams(12, k, 1, 1)).log2_value == pytest.approx(0, abs=1e-12)


def test_moment_ratio_lambda_one_exponents():
    d = 15
    rep = moment_ratio_formula(ModelParams(d, 2, 1, 0.5))
    same = 0.5 * 1.25 ** d - 0.5 * 1.125 ** d
    cross = d / 18 * 1.125 ** d
    assert rep.details["exponents"] == pytest.approx([same, cross, same], rel=1e-12)
    assert 2 ** rep.log2_value == pytest.approx(variance_ratio_lambda_one(d, 0.5), rel=1e-12)


@given(st.integers(2, 6), st.floats(0.1, 5), st.floats(0.05, 0.95))
def test_moment_ratio_exponents_symmetric(k, lam, p):
    ex = moment_ratio_formula(ModelParams(10, k, lam, p)).details["exponents"]
    assert ex == pytest.approx(ex[::-1], rel=1e-12, abs=1e-300)


def test_moment_ratio_needs_two_copies():
    with pytest.raises(ValueError):
        moment_ratio_formula(ModelParams(10, 1, 1, 0.5))


def test_central_moment_examples():
    assert sigma2_float(ModelParams(10, 2, 1, 1)) == pytest.approx(0, abs=1e-15)
    assert threshold_p(1.0) == pytest.approx(2 / 3)
    for d in (8, 20):
        for p in (0.7, 0.9):
            for k in (2, 3, 4):
                rep = central_moment_formula(ModelParams(d, k, 1, p))
                single = 2.0 ** -k * 2 ** d * (1 - p + p * 2.0 ** -k) ** d
                assert rep.details["single_vertex_term"] == pytest.approx(single, rel=1e-12)
    assert double_factorial(5) == 15 and double_factorial(0) == 1


def test_sigma2_leading_part_at_lambda_one():
    # the displayed form drops the alpha_1^{2d} piece, which is relatively negligible
    for p in (0.7, 0.9):
        r = [sigma2_float(ModelParams(d, 2, 1, p)) / (0.25 * (2 - 1.5 * p) ** d) for d in (20, 60, 200)]
        assert abs(r[-1] - 1) < abs(r[0] - 1) + 1e-15
        assert abs(r[-1] - 1) < 1e-3
    for k in (2, 4):
        exact = central_moment_formula(ModelParams(200, k, 1, 0.9)).details["value"]
        assert central_moment_lambda_one(200, 0.9, k) == pytest.approx(exact, rel=1e-3)


def test_fluctuation_normalizer():
    c, s = xd_normalizer(10, 2 / 3)
    assert s == pytest.approx(0, abs=1e-12)
    assert xd_normalizer(8, 1.0)[1] == pytest.approx(-4)
    assert c == pytest.approx(1 + 2 ** 9 + 0.5 * (4 / 3) ** 10 / math.log(2))


def test_classical_correction_small_dimension():
    rep = ks_jp_values(3)
    assert rep.details["relative_correction"] == pytest.approx(0.25)
    assert rep.details["log2_with_correction"] == pytest.approx(5 + 0.5 / math.log(2) + math.log2(1.25))


def test_gtilde_clauses():
    prm = ModelParams(100, 1, 1, 0.9)
    lt = math.log(1 / alpha_tilde(1, AlphaParams(1, 0.9)))
    assert gtilde(5, prm) == pytest.approx((500 - 75) * lt - 35 * math.log(100))
    assert gtilde(50, prm) == pytest.approx(100 * 50 * lt / 20)
    assert gtilde(10 ** 8 + 1, prm) == pytest.approx((10 ** 8 + 1) / 1000)
    with pytest.raises(ValueError):
        gtilde(0, prm)


def test_gtilde_ratio_nonincreasing_in_regime():
    prm = ModelParams(400, 1, 1, 0.9)
    ns = list(range(1, 2000)) + [400 ** 4 - 1, 400 ** 4, 400 ** 4 + 1, 400 ** 5]
    ratios = [gtilde(n, prm) / n for n in ns]
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))


def test_x_star_examples():
    assert x_star(AlphaParams(1, 0.4)) is None
    assert x_star(AlphaParams(1, 0.5)) is None
    ap = AlphaParams(1, 0.9)
    xs = x_star(ap)
    assert abs(g_shape(xs, ap)) < 1e-9
    assert f_root(xs, ap) < f_root(xs / 2, ap) and f_root(xs, ap) < f_root(2 * xs, ap)
    with pytest.raises(ValueError):
        x_star(AlphaParams(1, 1.0))


def test_x_star_grows_as_retention_drops_to_half():
    vals = [x_star(AlphaParams(1, p)) for p in (0.9, 0.7, 0.6, 0.55, 0.51)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@given(alphas)
def test_f_root_shape(ap):
    grid = [0.05 * 1.2 ** i for i in range(40)]
    f = [f_root(x, ap) for x in grid]
    xs = x_star(ap)
    for x, a, b in zip(grid, f, f[1:]):
        if xs is None or x + 1e-9 < xs and x * 1.2 <= xs:
            assert b < a * (1 + 1e-12)
        elif xs is not None and x >= xs:
            assert b > a * (1 - 1e-12)


@given(alphas)
def test_log_alpha_strictly_convex(ap):
    h = 0.05
    for i in range(1, 60):
        x = 0.1 * i
        second = math.log(alpha(x + h, ap)) - 2 * math.log(alpha(x, ap)) + math.log(alpha(x - h, ap))
        assert second > -1e-13


@given(alphas, st.floats(0.1, 5), st.floats(0, 5), st.floats(0.01, 1))
def test_spreading_arguments_increases_product(ap, x, extra, frac):
    # log-convexity: moving arguments apart raises the product alpha_x alpha_y
    y, t = x + extra, frac * x * 0.99
    assert alpha(x - t, ap) * alpha(y + t, ap) >= alpha(x, ap) * alpha(y, ap) * (1 - 1e-12)


@given(alphas)
def test_alpha_root_increasing(ap):
    vals = [alpha_tilde(0.1 * i, ap) for i in range(1, 80)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


def test_product_bound_random_tuples():
    rng = random.Random(7)
    for _ in range(200):
        ap = AlphaParams(rng.uniform(0.1, 5), rng.uniform(0.05, 0.95))
        lo = rng.uniform(0.1, 3)
        hi = lo + rng.uniform(0, 5)
        xs = [rng.uniform(lo, hi) for _ in range(rng.randint(1, 8))]
        lhs = sum(math.log(2 * alpha(x, ap)) for x in xs)
        rhs = sum(xs) * math.log(max(f_root(lo, ap), f_root(hi, ap)))
        assert lhs <= rhs + 1e-10
