"""Closed-form evaluators for the asymptotic formulas and the analytic
properties of the decay scales alpha_x.

Every evaluator returns a :class:`FormulaReport`; the main factor is kept as
a base-2 logarithm so that values like 2^{2^{d-1}} never overflow, and the
unspecified O(.) remainder is reported with constant 1, never added in.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from scipy.optimize import bisect

from .exact import ModelParams


@dataclass(frozen=True)
class AlphaParams:
    lam: float
    p: float

    @property
    def c(self) -> float:
        return math.log1p(self.lam)


def alpha(x: float, ap: AlphaParams) -> float:
    """alpha_x = (1-p) + p (1+lam)^{-x}, the per-vertex decay scale."""
    if x <= 0:
        raise ValueError("alpha_x needs x > 0")
    return 1.0 - ap.p * (-math.expm1(-ap.c * x))


def alpha_tilde(ell: float, ap: AlphaParams) -> float:
    return alpha(ell, ap) ** (1.0 / ell)


def delta(ell: float, ap: AlphaParams) -> float:
    return 1.0 + ((1.0 + ap.lam) ** ell - 1.0) * (1.0 - ap.p)


def f_root(x: float, ap: AlphaParams) -> float:
    """(2 alpha_x)^{1/x}."""
    return (2.0 * alpha(x, ap)) ** (1.0 / x)


def g_shape(x: float, ap: AlphaParams) -> float:
    """x alpha'_x - alpha_x log(2 alpha_x); same sign as d/dx log f_root."""
    a = alpha(x, ap)
    da = -ap.p * ap.c * math.exp(-ap.c * x)
    return x * da - a * math.log(2.0 * a)


def x_star(ap: AlphaParams, tol: float = 1e-12) -> float | None:
    """Minimiser of f_root: None when p <= 1/2 (f_root is then decreasing)."""
    if not 0 < ap.p < 1:
        raise ValueError("x_star needs p in (0,1)")
    if ap.p <= 0.5:
        return None
    lo, hi = 1e-9, 1.0
    while g_shape(hi, ap) <= 0:
        hi *= 2.0
        if hi > 1e8:
            raise ArithmeticError("no sign change found for g")
    return bisect(g_shape, lo, hi, args=(ap,), xtol=tol, rtol=4 * sys.float_info.epsilon, maxiter=500)


@dataclass
class FormulaReport:
    formula_id: str
    leading_log2: float
    correction_terms: list[tuple[str, float]] = field(default_factory=list)
    error_term_magnitude: float = 0.0
    flags: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        return sum(v for _, v in self.correction_terms)

    @property
    def log2_value(self) -> float:
        return self.leading_log2 + self.exponent / math.log(2)

    @property
    def ln_value(self) -> float:
        return self.leading_log2 * math.log(2) + self.exponent

    def to_json(self) -> dict:
        return {"formula_id": self.formula_id, "leading_log2": self.leading_log2,
                "correction_terms": [{"name": n, "value": v} for n, v in self.correction_terms],
                "error_term_magnitude": self.error_term_magnitude,
                "log2_value": self.log2_value, "flags": self.flags, "details": self.details}


def _ap(params: ModelParams) -> AlphaParams:
    return AlphaParams(float(params.lam), float(params.p))


def _pow2d(d: int, base: float, mult: float = 1.0) -> float:
    """2^d * base^(mult*d) computed in log space."""
    if base <= 0:
        return 0.0
    return math.exp(d * math.log(2) + mult * d * math.log(base))


def validity_flag(params: ModelParams, k: int = 1) -> bool:
    d = params.d
    if d < 2:
        return False
    return float(params.lam * params.p) >= k * k * math.log(d) / d ** (1 / 3)


def second_order_a(lam: float, p: float) -> float:
    q = 1 - p
    return (1 + lam) ** 2 * (1 + lam * q * q) ** 2 / (4 * (1 + lam * q) ** 4) - 0.25


def second_order_a_exact(lam: Fraction, p: Fraction) -> Fraction:
    q = 1 - p
    return (1 + lam) ** 2 * (1 + lam * q * q) ** 2 / (4 * (1 + lam * q) ** 4) - Fraction(1, 4)


def expectation_formula(params: ModelParams, order: int = 2) -> FormulaReport:
    """E Z(Q_{d,p}, lam) ~ 2 (1+lam)^{2^{d-1}} exp(series in 2^d alpha_1^{id})."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    d = params.d
    lam, p = float(params.lam), float(params.p)
    a1 = 1 - lam * p / (1 + lam)
    lead = 2 ** (d - 1) * math.log2(1 + lam) + 1
    terms = [("clusters_size_1", lam / 2 * _pow2d(d, a1))]
    if order == 2:
        a = second_order_a(lam, p)
        terms.append(("clusters_size_2", (a * math.comb(d, 2) - 0.25) * lam ** 2 * _pow2d(d, a1, 2)))
        err = d ** 4 * lam ** 3 * _pow2d(d, a1, 3)
    else:
        err = d ** 2 * lam ** 2 * _pow2d(d, a1, 2)
    return FormulaReport("expectation", lead, terms, err,
                         {"validity": validity_flag(params)}, {"order": order, "alpha_1": a1})


def expectation_lambda_one(d: int, p: float, order: int = 2) -> FormulaReport:
    """The lam = 1 specialisation written directly in terms of p."""
    terms = [("clusters_size_1", 0.5 * (2 - p) ** d)]
    if order == 2:
        a = (1 + (1 - p) ** 2) ** 2 / (2 - p) ** 4 - 0.25
        terms.append(("clusters_size_2", (a * math.comb(d, 2) - 0.25) * _pow2d(d, 1 - p / 2, 2)))
    err = d ** 4 * _pow2d(d, 1 - p / 2, 3) if order == 2 else d ** 2 * _pow2d(d, 1 - p / 2, 2)
    return FormulaReport("expectation_lambda_one", 2 ** (d - 1) + 1, terms, err)


def half_probability_expectation(d: int, coefficient: Fraction = Fraction(19, 81)) -> FormulaReport:
    """E i(Q_{d,1/2}) with second-order coefficient c in (1/4)(9/8)^d (c C(d,2) - 1).

    The coefficient implied by the general second-order term at p = 1/2 is 19/81;
    pass 91/9 to evaluate the alternative printed value for comparison.
    """
    c = float(coefficient)
    terms = [("clusters_size_1", 0.5 * 1.5 ** d),
             ("clusters_size_2", 0.25 * 1.125 ** d * (c * math.comb(d, 2) - 1))]
    return FormulaReport("expectation_half", 2 ** (d - 1) + 1, terms,
                         d ** 4 * (27 / 32) ** d, details={"coefficient": str(coefficient)})


def half_probability_variance(d: int, coefficient: Fraction = Fraction(19, 162),
                              prefactor: int = 2) -> FormulaReport:
    """Var i(Q_{d,1/2}) ~ C exp[(3/2)^d + (1/2)(5/4)^d + (9/8)^d (c C(d,2) - 1)] 2^{2^d}.

    Squaring the p = 1/2 mean and multiplying by (ratio - 1), with the ratio's
    dominant term (1/2) exp[(1/2)(5/4)^d - (1/2)(9/8)^d], gives C = 2 and
    c = 19/162; the alternative printed constants are C = 4, c = 91/18.
    """
    c = float(coefficient)
    terms = [("first_moment_squared", 1.5 ** d), ("same_side_pairs", 0.5 * 1.25 ** d),
             ("clusters_size_2", 1.125 ** d * (c * math.comb(d, 2) - 1))]
    return FormulaReport("variance_half", 2 ** d + math.log2(prefactor), terms,
                         d ** 2 * (15 / 16) ** d,
                         details={"coefficient": str(coefficient), "prefactor": prefactor})


def classical_count(d: int) -> FormulaReport:
    """i(Q_d) ~ 2 sqrt(e) 2^{2^{d-1}} with relative correction (3d^2-3d-2)/(8 2^d)."""
    corr = (3 * d * d - 3 * d - 2) / (8 * 2 ** d)
    return FormulaReport("classical_count", 2 ** (d - 1) + 1, [("sqrt_e", 0.5)],
                         d ** 4 * 2.0 ** (-2 * d),
                         details={"relative_correction": corr,
                                  "log2_with_correction": 2 ** (d - 1) + 1 + 0.5 / math.log(2)
                                  + math.log2(1 + corr)})


def moment_ratio_formula(params: ModelParams) -> FormulaReport:
    """E Z^k / (E Z)^k as a binomial mixture of exponentials."""
    k = params.k
    if k < 2:
        raise ValueError("moment ratio needs k >= 2")
    d = params.d
    lam, p = float(params.lam), float(params.p)
    ap = AlphaParams(lam, p)
    a1, a2 = alpha(1, ap), alpha(2, ap)
    same = 2 ** d * (a2 ** d - a1 ** (2 * d))
    cross = d * p * (1 - p) * lam ** 4 / (2 * (1 + lam - p * lam) ** 2) * _pow2d(d, a1, 2)
    exps = []
    for m in range(k + 1):
        e = lam ** 2 / 2 * (math.comb(m, 2) + math.comb(k - m, 2)) * same + m * (k - m) * cross
        exps.append(e)
    top = max(exps)
    s = sum(math.comb(k, m) * math.exp(e - top) for m, e in enumerate(exps))
    log2_val = -k + (top + math.log(s)) / math.log(2)
    eps = a1 * a2 if k == 2 else alpha(3, ap)
    return FormulaReport("moment_ratio", log2_val, [], lam ** 3 * d ** 4 * _pow2d(d, eps),
                         {"validity": validity_flag(params, k)},
                         {"exponents": exps, "epsilon": eps})


def variance_ratio_lambda_one(d: int, p: float) -> float:
    """Two-term second-moment ratio written in terms of p (lam = 1)."""
    e1 = 0.5 * (2 - 1.5 * p) ** d - 0.5 * _pow2d(d, 1 - p / 2, 2)
    e2 = p * (1 - p) / (2 * (2 - p) ** 2) * d * _pow2d(d, 1 - p / 2, 2)
    return 0.5 * math.exp(e1) + 0.5 * math.exp(e2)


def threshold_p(lam: float) -> float:
    return (1 + lam) ** 2 / (2 * lam * (2 + lam))


def sigma2_float(params: ModelParams) -> float:
    d = params.d
    lam, p = float(params.lam), float(params.p)
    ap = AlphaParams(lam, p)
    a1, a2 = alpha(1, ap), alpha(2, ap)
    return 0.25 * lam ** 2 * (_pow2d(d, a2) + (p * (1 - p) * lam ** 2 * d / (1 + lam - p * lam) ** 2 - 1)
                              * _pow2d(d, a1, 2))


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def central_moment_formula(params: ModelParams) -> FormulaReport:
    """Normalized k-th central moment: (lam/2)^k 2^d alpha_k^d [+ sigma^k (k-1)!! for even k]."""
    k = params.k
    if k < 2:
        raise ValueError("central moment needs k >= 2")
    d = params.d
    lam, p = float(params.lam), float(params.p)
    ap = AlphaParams(lam, p)
    s2 = sigma2_float(params)
    single = (lam / 2) ** k * _pow2d(d, alpha(k, ap))
    gauss = (max(s2, 0.0) ** (k / 2)) * double_factorial(k - 1) if k % 2 == 0 else 0.0
    value = single + gauss
    lead = math.log2(value) if value > 0 else -math.inf
    return FormulaReport("central_moment", lead, [], max(s2, 0.0) ** (k / 2) + single,
                         {"above_threshold": p > threshold_p(lam)},
                         {"sigma2": s2, "single_vertex_term": single, "gaussian_term": gauss,
                          "threshold_p": threshold_p(lam), "value": value})


def central_moment_lambda_one(d: int, p: float, k: int) -> float:
    """2^{-k}(k-1)!!(2-3p/2)^{kd/2} + 2^{-k} 2^d (1-p+p 2^{-k})^d."""
    return (2.0 ** -k * double_factorial(k - 1) * (2 - 1.5 * p) ** (k * d / 2)
            + 2.0 ** -k * _pow2d(d, 1 - p + p * 2.0 ** -k))


def xd_normalizer(d: int, p: float) -> tuple[float, float]:
    """(log2 centre, log2 scale) for X_d = (i / centre - 1) / scale."""
    base = 2 - 1.5 * p
    if base <= 0:
        raise ValueError("2 - 3p/2 must be positive")
    center = 1 + 2 ** (d - 1) + 0.5 * (2 - p) ** d / math.log(2)
    return center, d / 2 * math.log2(base)


def ks_jp_values(d: int) -> FormulaReport:
    return classical_count(d)


def gtilde(n: int, params: ModelParams) -> float:
    """Piecewise decay target used in the convergence criterion."""
    if n < 1:
        raise ValueError("n must be at least 1")
    d, k = params.d, params.k
    ap = _ap(params)
    lt = math.log(1 / alpha_tilde(k, ap)) if ap.p > 0 else 0.0
    if n <= d / 10:
        return (d * n - 3 * n * n) * lt - 7 * n * math.log(d)
    if n <= d ** 4:
        return d * n * lt / 20
    return n / d ** 1.5


def f_kp(n: int, d: int) -> float:
    return n * d ** -1.5


def g_kp(n: int, params: ModelParams) -> float:
    return f_kp(n, params.d) + gtilde(n, params)


REGISTRY = {
    "expectation": "E Z with clusters up to size 2",
    "expectation_lambda_one": "E i(Q_{d,p}) in terms of p",
    "classical_count": "i(Q_d) leading asymptotics and relative correction",
    "moment_ratio": "E Z^k / (E Z)^k",
    "central_moment": "normalized k-th central moment",
    "xd_normalizer": "centre and scale of the fluctuation statistic",
    "x_star": "minimiser of (2 alpha_x)^{1/x}",
    "sigma2": "leading variance scale",
    "gtilde": "decay target g~(n) at n=1",
}
