"""Mergeable streaming accumulator for central moments up to order 8.

Blocks are summarised directly from their values and then combined with the
pairwise update for arbitrary-order central sums.  Merging is associative up
to floating-point reordering; tests hold it to ``MERGE_RTOL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_ORDER = 8
MERGE_RTOL = 1e-10
Z95 = 1.959963984540054


@dataclass
class MomentAccumulator:
    """count, mean and central sums M[j] = sum (x - mean)^j for j = 2..8."""

    count: int = 0
    mean: float = 0.0
    sums: np.ndarray = field(default_factory=lambda: np.zeros(MAX_ORDER + 1))

    @classmethod
    def from_values(cls, values) -> "MomentAccumulator":
        x = np.asarray(values, dtype=float)
        if x.size == 0:
            return cls()
        mean = math.fsum(x.tolist()) / x.size
        dev = x - mean
        sums = np.zeros(MAX_ORDER + 1)
        powd = np.ones_like(dev)
        for j in range(1, MAX_ORDER + 1):
            powd = powd * dev
            if j >= 2:
                sums[j] = math.fsum(powd.tolist())
        return cls(int(x.size), mean, sums)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.count == 0:
            return MomentAccumulator(self.count, self.mean, self.sums.copy())
        if self.count == 0:
            return MomentAccumulator(other.count, other.mean, other.sums.copy())
        na, nb = self.count, other.count
        n = na + nb
        delta = other.mean - self.mean
        out = np.zeros(MAX_ORDER + 1)
        for p in range(2, MAX_ORDER + 1):
            s = self.sums[p] + other.sums[p]
            for k in range(1, p - 1):
                s += math.comb(p, k) * delta ** k * (
                    (-nb / n) ** k * self.sums[p - k] + (na / n) ** k * other.sums[p - k])
            s += (na * nb / n * delta) ** p * (1 / nb ** (p - 1) - (-1 / na) ** (p - 1))
            out[p] = s
        return MomentAccumulator(n, self.mean + delta * nb / n, out)

    def central(self, j: int) -> float:
        """Plug-in central moment sum/n (j = 1 gives 0)."""
        if j == 1:
            return 0.0
        return float(self.sums[j] / self.count)

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        return float(self.sums[2] / (self.count - 1)) if self.count > 1 else 0.0


def merge_tree(accs: list[MomentAccumulator]) -> MomentAccumulator:
    """Deterministic balanced pairwise merge."""
    if not accs:
        return MomentAccumulator()
    level = list(accs)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def accumulate(values, block: int = 1024) -> MomentAccumulator:
    x = np.asarray(values, dtype=float)
    return merge_tree([MomentAccumulator.from_values(x[i:i + block])
                       for i in range(0, x.size, block)])


def central_moment_halfwidth(acc: MomentAccumulator, k: int) -> float | None:
    """95% half-width for the k-th central moment by the delta method.

    Var(m_k) ~ (mu_2k - mu_k^2 - 2k mu_{k-1} mu_{k+1} + k^2 mu_2 mu_{k-1}^2) / n,
    needing moments up to 2k, so only k <= 4 is available here.
    """
    if 2 * k > MAX_ORDER or acc.count < 2:
        return None
    mu = [1.0, 0.0] + [acc.central(j) for j in range(2, MAX_ORDER + 1)]
    v = mu[2 * k] - mu[k] ** 2 - 2 * k * mu[k - 1] * mu[k + 1] + k * k * mu[2] * mu[k - 1] ** 2
    return Z95 * math.sqrt(max(v, 0.0) / acc.count)


def mean_halfwidth(acc: MomentAccumulator) -> float:
    return Z95 * math.sqrt(acc.variance / acc.count) if acc.count > 1 else math.inf


def standardized(acc: MomentAccumulator) -> dict:
    """Skewness and excess kurtosis with the normal-theory standard errors
    sqrt(6/n) and sqrt(24/n); these are approximate away from Gaussianity."""
    m2 = acc.central(2)
    n = acc.count
    if n < 2 or m2 <= (1e-14 * acc.mean) ** 2:
        return {"degenerate": True, "skewness": None, "excess_kurtosis": None,
                "skewness_halfwidth": None, "kurtosis_halfwidth": None}
    return {"degenerate": False,
            "skewness": acc.central(3) / m2 ** 1.5,
            "excess_kurtosis": acc.central(4) / m2 ** 2 - 3.0,
            "skewness_halfwidth": Z95 * math.sqrt(6 / n),
            "kurtosis_halfwidth": Z95 * math.sqrt(24 / n)}
