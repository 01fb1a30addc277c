import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdp.moments import (MAX_ORDER, MERGE_RTOL, MomentAccumulator, accumulate,
                         central_moment_halfwidth, mean_halfwidth, merge_tree, standardized)

arrays = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=60)


def _close(a: MomentAccumulator, b: MomentAccumulator):
    assert a.count == b.count
    assert a.mean == pytest.approx(b.mean, rel=MERGE_RTOL, abs=1e-9)
    scale = max(1.0, *(abs(v) for v in b.sums))
    for j in range(2, MAX_ORDER + 1):
        assert abs(a.sums[j] - b.sums[j]) <= MERGE_RTOL * scale


def test_direct_summary_matches_numpy():
    x = np.random.default_rng(3).normal(2, 3, 500)
    acc = MomentAccumulator.from_values(x)
    assert acc.mean == pytest.approx(x.mean())
    for j in range(2, 9):
        assert acc.central(j) == pytest.approx(np.mean((x - x.mean()) ** j), rel=1e-10)
    assert acc.variance == pytest.approx(np.var(x, ddof=1))


@given(arrays, arrays)
def test_merge_equals_direct(a, b):
    _close(MomentAccumulator.from_values(a).merge(MomentAccumulator.from_values(b)),
           MomentAccumulator.from_values(a + b))


@given(arrays, arrays, arrays)
def test_merge_associative(a, b, c):
    A, B, C = (MomentAccumulator.from_values(v) for v in (a, b, c))
    _close(A.merge(B).merge(C), A.merge(B.merge(C)))


def test_merge_with_empty():
    a = MomentAccumulator.from_values([1.0, 2.0, 4.0])
    for m in (a.merge(MomentAccumulator()), MomentAccumulator().merge(a)):
        _close(m, a)


def test_block_sizes_agree():
    x = np.random.default_rng(5).exponential(1.0, 5000)
    ref = MomentAccumulator.from_values(x)
    for block in (1, 7, 1024, 10000):
        _close(accumulate(x, block), ref)
    assert merge_tree([]).count == 0


def test_halfwidths_gaussian_sanity():
    rng = np.random.default_rng(11)
    n = 20000
    acc = accumulate(rng.normal(0, 2, n))
    # Var(sample variance) = 2 sigma^4 / n for a Gaussian
    assert central_moment_halfwidth(acc, 2) == pytest.approx(1.96 * math.sqrt(2 * 16 / n), rel=0.05)
    assert mean_halfwidth(acc) == pytest.approx(1.96 * 2 / math.sqrt(n), rel=0.02)
    assert central_moment_halfwidth(acc, 5) is None
    s = standardized(acc)
    assert abs(s["skewness"]) < 3 * s["skewness_halfwidth"]
    assert abs(s["excess_kurtosis"]) < 3 * s["kurtosis_halfwidth"]


def test_halfwidth_covers_truth():
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(200):
        acc = accumulate(rng.exponential(1.0, 400))
        # third central moment of Exp(1) is 2
        hits += abs(acc.central(3) - 2) <= central_moment_halfwidth(acc, 3)
    assert hits >= 150


def test_degenerate_standardization():
    assert standardized(accumulate(np.full(50, 3.0)))["degenerate"]
    assert standardized(accumulate([1.0]))["degenerate"]
