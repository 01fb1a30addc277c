"""Seeded Monte Carlo over random subgraphs of Q_d with exact per-sample Z.

Sample i is always the subgraph drawn from (seed, i), so the vector of
per-sample values does not depend on how indices are split across workers;
aggregation then runs over fixed-size blocks in index order.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import multiprocessing as mp
import numpy as np

from . import asymptotics
from .exact import (ModelParams, hardcore_on_sample_logZ, hypercube_postemp_logZ,
                    log2_fraction, postemp_partition)
from .graph import build_hypercube, sample_subgraph, EVEN
from .moments import (MomentAccumulator, accumulate, central_moment_halfwidth,
                      mean_halfwidth, standardized)

MAX_D = 6
BLOCK = 1024


@functools.lru_cache(maxsize=None)
def exact_mean_log2(d: int, lam: Fraction, p: Fraction) -> float:
    """log2 E Z(Q_{d,p}, lam); exact rational for d <= 5."""
    if d <= 5:
        return log2_fraction(postemp_partition(build_hypercube(d), lam, p))
    return hypercube_postemp_logZ(ModelParams(d, 1, lam, p)).log2_value


def reference_log2(params: ModelParams, reference: str) -> float:
    if reference == "exact":
        return exact_mean_log2(params.d, params.lam, params.p)
    if reference == "formula":
        return asymptotics.expectation_formula(params.with_(k=1), order=1).log2_value
    raise ValueError(f"unknown reference {reference!r}")


def sample_method(d: int) -> str:
    """Integer Gray-code histogram up to d = 5, layered transfer kernel at d = 6."""
    return "gray" if d <= 5 else "layered"


def _log2_range(d: int, lam: Fraction, p: Fraction, seed: int, start: int, stop: int) -> np.ndarray:
    from . import kernels
    kernels.set_threads(1)
    g = build_hypercube(d)
    method = sample_method(d)
    out = np.empty(stop - start)
    for i in range(start, stop):
        out[i - start] = hardcore_on_sample_logZ(sample_subgraph(g, p, seed, i), lam, method).log2_value
    return out


def sample_log2_values(params: ModelParams, samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """log2 Z for samples 0..samples-1, in index order."""
    d, lam, p = params.d, params.lam, params.p
    if workers <= 1 or samples < 2 * workers:
        return _log2_range(d, lam, p, seed, 0, samples)
    bounds = np.linspace(0, samples, workers + 1).astype(int)
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futs = [pool.submit(_log2_range, d, lam, p, seed, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])]
        return np.concatenate([f.result() for f in futs])


def _summary(values: np.ndarray) -> dict:
    if values.size == 0 or not np.all(np.isfinite(values)):
        return {"mean": None, "sd": None, "quantiles": None}
    qs = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {"mean": float(np.mean(values)),
            "sd": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
            "quantiles": dict(zip(["q05", "q25", "q50", "q75", "q95"], map(float, qs)))}


@dataclass
class MomentEstimates:
    d: int
    lam: Fraction
    p: Fraction
    seed: int
    sample_count: int
    reference: str
    reference_log2: float
    mean: float
    mean_halfwidth: float
    variance: float
    variance_halfwidth: float | None
    central_moments: dict
    central_halfwidths: dict
    standardized: dict
    xd_summary: dict
    extra: dict = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"d": self.d, "lambda": f"{self.lam.numerator}/{self.lam.denominator}",
                "p": f"{self.p.numerator}/{self.p.denominator}", "seed": self.seed,
                "sample_count": self.sample_count, "reference": self.reference,
                "reference_log2": self.reference_log2, "mean": self.mean,
                "mean_halfwidth": self.mean_halfwidth, "variance": self.variance,
                "variance_halfwidth": self.variance_halfwidth,
                "central_moments": {str(k): v for k, v in self.central_moments.items()},
                "central_halfwidths": {str(k): v for k, v in self.central_halfwidths.items()},
                "standardized": self.standardized, "xd_summary": self.xd_summary,
                "extra": self.extra}


def estimates_from_values(y: np.ndarray, *, d, lam, p, seed, reference, ref_log2,
                          scale: float | None) -> MomentEstimates:
    acc = accumulate(y, BLOCK)
    cm = {j: acc.central(j) for j in range(2, 7)}
    hw = {j: central_moment_halfwidth(acc, j) for j in range(2, 7)}
    xd = _summary((y - 1.0) / scale) if scale else {"mean": None, "sd": None, "quantiles": None}
    return MomentEstimates(d, Fraction(lam), Fraction(p), seed, int(y.size), reference, ref_log2,
                           acc.mean, mean_halfwidth(acc), acc.variance, hw[2], cm, hw,
                           standardized(acc), xd, values=y)


def run_mc(params: ModelParams, samples: int, seed: int, reference: str = "exact",
           workers: int = 1) -> MomentEstimates:
    """Moments of Y = Z / reference over ``samples`` seeded subgraphs."""
    if params.d > MAX_D:
        raise ValueError(f"Monte Carlo supports d <= {MAX_D}")
    if samples <= 1:
        raise ValueError("need at least two samples")
    ref = reference_log2(params, reference)
    logs = sample_log2_values(params, samples, seed, workers)
    y = np.exp2(logs - ref)
    p = float(params.p)
    scale = 2.0 ** asymptotics.xd_normalizer(params.d, p)[1] if 2 - 1.5 * p > 0 else None
    return estimates_from_values(y, d=params.d, lam=params.lam, p=params.p, seed=seed,
                                 reference=reference, ref_log2=ref, scale=scale)


def elementary_symmetric(x: np.ndarray, kmax: int) -> np.ndarray:
    """e_0..e_kmax of the entries of x."""
    e = np.zeros(kmax + 1)
    e[0] = 1.0
    for v in x:
        e[1:] = e[1:] + v * e[:-1]
    return e


def elementary_symmetric_direct(x, kmax: int) -> list[float]:
    return [math.fsum(math.prod(c) for c in combinations(list(x), k)) for k in range(kmax + 1)]


def even_degree_weights(sample) -> np.ndarray:
    """2^{-deg} of each even vertex in the sampled subgraph."""
    g = sample.base
    deg = np.zeros(g.vertex_count, dtype=np.int64)
    eu = np.array([e[0] for e in g.edge_list])
    ev = np.array([e[1] for e in g.edge_list])
    r = sample.retained_edges
    np.add.at(deg, eu[r], 1)
    np.add.at(deg, ev[r], 1)
    even = [v for v in range(g.vertex_count) if (g.bipartition[EVEN] >> v) & 1]
    return np.exp2(-deg[even].astype(float))


def warmup_expectation(d: int, p: float, k: int) -> float:
    return math.comb(2 ** (d - 1), k) * (1 - p / 2) ** (k * d)


def warmup_statistic(params: ModelParams, K: int, samples: int, seed: int) -> dict:
    """Per-sample S_k = sum over k-subsets A of even vertices of 2^{-sum deg}, k <= K,
    and their sum S; means compared with binom(n,k)(1-p/2)^{kd}."""
    d = params.d
    if d > MAX_D:
        raise ValueError(f"warm-up statistic supports d <= {MAX_D}")
    if not 0 <= K <= 4:
        raise ValueError("K must lie in 0..4")
    g = build_hypercube(d)
    sk = np.empty((samples, K + 1))
    for i in range(samples):
        sk[i] = elementary_symmetric(even_degree_weights(sample_subgraph(g, params.p, seed, i)), K)
    p = float(params.p)
    per_k = {}
    for k in range(K + 1):
        acc = accumulate(sk[:, k])
        per_k[k] = {"mean": acc.mean, "halfwidth": mean_halfwidth(acc),
                    "stderr": math.sqrt(acc.variance / acc.count) if acc.count > 1 else math.inf,
                    "expected": warmup_expectation(d, p, k)}
    total = accumulate(sk.sum(axis=1))
    return {"d": d, "p": str(params.p), "K": K, "samples": samples, "seed": seed, "per_k": per_k,
            "S": {"mean": total.mean, "halfwidth": mean_halfwidth(total),
                  "expected": sum(warmup_expectation(d, p, k) for k in range(K + 1))},
            "values": sk}


def normality_probe(params: ModelParams, samples: int, seed: int, workers: int = 1) -> dict:
    """Standardized third and fourth moments of Z (report-only)."""
    est = run_mc(params, samples, seed, "formula", workers)
    st = dict(est.standardized)
    out = {"d": params.d, "p": str(params.p), "samples": samples, "seed": seed,
           "in_regime": float(params.p) > asymptotics.threshold_p(float(params.lam)), **st}
    if not st["degenerate"]:
        out["kurtosis"] = st["excess_kurtosis"] + 3.0
    return out
