"""Command-line entry point: ``qdp <subcommand> ...``.

Every run prints one JSON document (or CSV for tables) that embeds its full
configuration, so a result can be replayed from its own output.  Exit codes:
0 success, 1 a verification check failed, 2 configuration or budget error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import asymptotics, clusters, exact, montecarlo, polymers
from .exact import Budgets, ModelParams, frac_str
from .graph import BudgetExceeded, build_hypercube

SCHEMA = "qdp/1"
SUITES = ("identities", "polymers", "clusters", "formulas", "mc")


@dataclass
class RunConfig:
    subcommand: str
    d: int = 3
    k: int = 1
    lam: str = "1"
    p: str = "1/2"
    order: int = 2
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    budgets: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def params(self) -> ModelParams:
        return ModelParams(self.d, self.k, Fraction(self.lam), Fraction(self.p))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("out")
        return out


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return frac_str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    return obj


# ---------------------------------------------------------------- subcommands

def cmd_exact(cfg: RunConfig) -> dict:
    op = cfg.extra.get("op", "independent-sets")
    g = build_hypercube(cfg.d)
    prm = cfg.params()
    if op == "independent-sets":
        return {"op": op, "value": exact.count_independent_sets(g, cfg.workers)}
    if op == "hardcore":
        return {"op": op, "value": exact.hardcore_partition(g, prm.lam, cfg.workers)}
    if op == "postemp":
        if cfg.d <= 5:
            return {"op": op, "value": exact.postemp_partition(g, prm.lam, prm.p)}
        return {"op": op, "value": exact.hypercube_postemp_logZ(prm, cfg.workers).to_json()}
    if op == "ksystem":
        alg = cfg.extra.get("algorithm", "direct")
        return {"op": op, "algorithm": alg, "value": exact.ksystem_partition(g, prm, alg)}
    raise ValueError(f"unknown exact op {op!r}")


def cmd_polymer(cfg: RunConfig) -> dict:
    prm = cfg.params()
    g = build_hypercube(cfg.d)
    scenario = cfg.extra.get("scenario")
    if scenario:
        gamma, _ = polymers.scenario_polymer(scenario, cfg.d, cfg.k)
        return {"scenario": scenario, "polymer": gamma.to_json(),
                "closed_form": polymers.closed_form_weight(scenario, prm),
                "factorized": polymers.polymer_weight_factorized(g, gamma, prm.lam, prm.p)}
    defects = polymers.DefectVector.parse(cfg.extra.get("defects") or "E" * cfg.k)
    rows = []
    for gamma in polymers.enumerate_polymers(cfg.d, defects, cfg.order):
        rows.append({"polymer": gamma.to_json(), "size": gamma.size,
                     "weight": polymers.polymer_weight_factorized(g, gamma, prm.lam, prm.p)})
    return {"defects": str(defects), "max_size": cfg.order, "count": len(rows), "polymers": rows}


def cmd_cluster(cfg: RunConfig) -> dict:
    prm = cfg.params()
    if cfg.extra.get("coefficients"):
        fits = clusters.coefficient_polynomials(prm, cfg.order)
        return {"coefficients": [{"index": f.index, "nodes": f.nodes, "coeffs": f.coeffs,
                                  "check_passed": f.check_passed} for f in fits]}
    defects = polymers.DefectVector.parse(cfg.extra.get("defects") or "E" * cfg.k)
    series = clusters.cluster_series(prm, defects, cfg.order, cfg.extra.get("mode", "symmetry"))
    return {"defects": str(defects), "series": series.to_json()}


def _formula(fid: str, prm: ModelParams) -> asymptotics.FormulaReport | dict:
    lam, p = float(prm.lam), float(prm.p)
    if fid == "expectation":
        return asymptotics.expectation_formula(prm.with_(k=1), 2)
    if fid == "expectation_lambda_one":
        return asymptotics.expectation_lambda_one(prm.d, p)
    if fid == "classical_count":
        return asymptotics.classical_count(prm.d)
    if fid == "moment_ratio":
        return asymptotics.moment_ratio_formula(prm if prm.k >= 2 else prm.with_(k=2))
    if fid == "central_moment":
        return asymptotics.central_moment_formula(prm if prm.k >= 2 else prm.with_(k=2))
    if fid == "xd_normalizer":
        c, s = asymptotics.xd_normalizer(prm.d, p)
        return {"center_log2": c, "scale_log2": s}
    if fid == "x_star":
        return {"x_star": asymptotics.x_star(asymptotics.AlphaParams(lam, p))}
    if fid == "sigma2":
        return {"sigma2": asymptotics.sigma2_float(prm)}
    if fid == "gtilde":
        return {"gtilde": asymptotics.gtilde(1, prm)}
    raise ValueError(f"unknown formula id {fid!r}")


def cmd_asym(cfg: RunConfig) -> dict:
    fid = cfg.extra.get("formula", "expectation")
    rep = _formula(fid, cfg.params())
    return rep.to_json() if isinstance(rep, asymptotics.FormulaReport) else {"formula_id": fid, **rep}


def cmd_mc(cfg: RunConfig) -> dict:
    prm = cfg.params()
    if cfg.extra.get("warmup") is not None:
        res = montecarlo.warmup_statistic(prm, int(cfg.extra["warmup"]), cfg.samples, cfg.seed)
        res.pop("values")
        return res
    if cfg.extra.get("probe"):
        return montecarlo.normality_probe(prm, cfg.samples, cfg.seed, cfg.workers)
    est = montecarlo.run_mc(prm, cfg.samples, cfg.seed, cfg.extra.get("reference", "exact"),
                            cfg.workers)
    return est.to_json()


def _grid(text: str, cast):
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b) + 1))
    return [cast(x) for x in text.split(",") if x]


def _flatten(prefix: str, rep) -> dict:
    if isinstance(rep, asymptotics.FormulaReport):
        row = {f"{prefix}.log2_value": rep.log2_value,
               f"{prefix}.error_term": rep.error_term_magnitude}
        for name, v in rep.correction_terms:
            row[f"{prefix}.{name}"] = v
        return row
    return {f"{prefix}.{k}": v for k, v in rep.items()}


def table_rows(formulas: list[str], ds, ps, lams, ks) -> list[dict]:
    unknown = [f for f in formulas if f not in asymptotics.REGISTRY and f != "exact_count"]
    if unknown:
        raise ValueError(f"unknown formula ids {unknown}")
    rows = []
    for d in ds:
        for lam in lams:
            for p in ps:
                for k in ks:
                    prm = ModelParams(d, k, lam, p)
                    row = {"d": d, "lambda": frac_str(prm.lam), "p": frac_str(prm.p), "k": k}
                    for fid in formulas:
                        if fid == "exact_count":
                            row["exact_count.log2"] = math.log2(exact.count_independent_sets(
                                build_hypercube(d))) if d <= 6 else None
                        else:
                            row.update(_flatten(fid, _formula(fid, prm)))
                    rows.append(row)
    return rows


def cmd_table(cfg: RunConfig) -> dict:
    ex = cfg.extra
    formulas = [f for f in ex.get("formulas", "expectation_lambda_one").split(",") if f]
    rows = table_rows(formulas, _grid(ex.get("d_grid", "3:12"), int),
                      _grid(ex.get("p_grid", "1/2,7/10,9/10"), Fraction),
                      _grid(ex.get("lambda_grid", cfg.lam), Fraction),
                      _grid(ex.get("k_grid", str(cfg.k)), int))
    return {"rows": rows}


def rows_to_csv(rows: list[dict]) -> str:
    cols = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in cols})
    return buf.getvalue()


# ---------------------------------------------------------------- verify

class CheckLog:
    def __init__(self):
        self.checks: list[dict] = []

    def add(self, name: str, anchor: str, inputs: dict, expected, actual, passed: bool | None = None):
        ok = (expected == actual) if passed is None else bool(passed)
        self.checks.append({"name": name, "anchor": anchor, "inputs": _jsonable(inputs),
                            "expected": _jsonable(expected), "actual": _jsonable(actual),
                            "passed": ok})
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _small_graphs():
    from .graph import Graph
    yield "Q_2", build_hypercube(2)
    yield "Q_3", build_hypercube(3)
    yield "path_4", Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    yield "triangle", Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    yield "star_4", Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])


def verify_identities(log: CheckLog, cfg: RunConfig) -> None:
    anchor = "k-th moment of the random-subgraph hard-core model equals the k-system partition function"
    for name, g in _small_graphs():
        for k in (1, 2):
            for lam in (Fraction(1, 2), Fraction(2)):
                for p in (Fraction(0), Fraction(1, 2), Fraction(1)):
                    prm = ModelParams(g.dim or 1, k, lam, p)
                    a = exact.ksystem_partition(g, prm, "direct")
                    b = exact.ksystem_partition(g, prm, "edge_subsets")
                    log.add(f"ksystem[{name}]", anchor,
                            {"graph": name, "k": k, "lambda": lam, "p": p}, a, b)
    for d, n in ((1, 3), (2, 7), (3, 35)):
        log.add(f"i(Q_{d})", "independent-set counts of small hypercubes", {"d": d}, n,
                exact.count_independent_sets(build_hypercube(d)))


def verify_polymers(log: CheckLog, cfg: RunConfig) -> None:
    anchor = "factorized polymer weight equals the decorated-polymer sum"
    lam, p = Fraction(cfg.lam), Fraction(cfg.p)
    for d in (3, 4):
        g = build_hypercube(d)
        for sides in ("E", "EE", "EO"):
            defects = polymers.DefectVector.parse(sides)
            for gamma in polymers.enumerate_polymers(d, defects, 2):
                brute = polymers.polymer_weight_bruteforce(g, gamma, lam, p)
                fact = polymers.polymer_weight_factorized(g, gamma, lam, p)
                log.add(f"weight d={d} {sides} {gamma.to_json()['components']}", anchor,
                        {"d": d, "defects": sides, "polymer": gamma.to_json(), "lambda": lam, "p": p},
                        brute, fact)
    for d in range(2, 6):
        for scen in polymers.SCENARIOS:
            k = 2 if scen in ("III", "IV") else 1
            prm = ModelParams(d, k, lam, p)
            gamma, _ = polymers.scenario_polymer(scen, d, k)
            log.add(f"closed form {scen} d={d}", "closed-form weights of the smallest polymers",
                    {"d": d, "k": k, "lambda": lam, "p": p, "scenario": scen},
                    polymers.closed_form_weight(scen, prm),
                    polymers.polymer_weight_factorized(build_hypercube(d), gamma, lam, p))


def verify_clusters(log: CheckLog, cfg: RunConfig) -> None:
    lam, p = Fraction(cfg.lam), Fraction(cfg.p)
    for d, order in ((3, 2), (4, 2), (4, 3)):
        prm = ModelParams(d, 1, lam, p)
        dv = polymers.DefectVector.uniform(1)
        a = clusters.cluster_series(prm, dv, order, "direct").total
        b = clusters.cluster_series(prm, dv, order, "symmetry").total
        log.add(f"direct=symmetry d={d} order={order}", "translation symmetry of cluster sums",
                {"d": d, "order": order, "lambda": lam, "p": p}, a, b)
    for d in (4, 5):
        prm = ModelParams(d, 2, lam, p)
        log.add(f"pair spans d={d}", "size-2 clusters spanning two coordinates",
                {"d": d, "lambda": lam, "p": p}, clusters.a_same_a_diff(prm),
                clusters.a_same_a_diff_enumerated(prm))
    prm = ModelParams(4, 1, lam, p)
    fits = clusters.coefficient_polynomials(prm, 3)
    f1 = fits[0].coeffs
    log.add("f_1", "first cluster coefficient", {"lambda": lam, "p": p},
            [lam / 2], [c for c in f1 if c] or [Fraction(0)])
    a = clusters.second_order_coefficient(prm)
    expected = [-lam ** 2 / 4, -a * lam ** 2 / 2, a * lam ** 2 / 2]
    got = list(fits[1].coeffs) + [Fraction(0)] * (3 - len(fits[1].coeffs))
    log.add("f_2", "second cluster coefficient lam^2 (a C(d,2) - 1/4)", {"lambda": lam, "p": p},
            expected, got[:3])


def verify_formulas(log: CheckLog, cfg: RunConfig) -> None:
    grid = [(Fraction(a), Fraction(b)) for a in ("1/2", "1", "2") for b in ("1/4", "1/2", "1")]
    for d in (3, 4, 5):
        for lam, p in grid:
            prm = ModelParams(d, 2, lam, p)
            same, diff = clusters.a_same_a_diff(prm)
            log.add(f"sigma2 d={d}", "4 sigma^2 = 2 A_same + 2 A_diff",
                    {"d": d, "lambda": lam, "p": p}, 4 * clusters.sigma_squared(prm), 2 * same + 2 * diff)
    for d in (4, 7, 10):
        for p in (0.5, 0.9):
            prm = ModelParams(d, 1, 1, Fraction(p).limit_denominator())
            a = asymptotics.expectation_formula(prm, 2).log2_value
            b = asymptotics.expectation_lambda_one(d, p, 2).log2_value
            log.add(f"lambda=1 reduction d={d} p={p}", "general expectation formula at lam = 1",
                    {"d": d, "p": p}, a, b, math.isclose(a, b, rel_tol=1e-12))
            r2 = asymptotics.moment_ratio_formula(prm.with_(k=2)).log2_value
            r2b = math.log2(asymptotics.variance_ratio_lambda_one(d, p))
            log.add(f"second moment ratio d={d} p={p}", "k=2 moment ratio at lam = 1",
                    {"d": d, "p": p}, r2b, r2, math.isclose(r2, r2b, rel_tol=1e-9, abs_tol=1e-12))
            for k in (2, 3, 4):
                c = asymptotics.central_moment_formula(prm.with_(k=k)).details["single_vertex_term"]
                c2 = 2.0 ** -k * 2 ** d * (1 - p + p * 2.0 ** -k) ** d
                log.add(f"single-vertex moment d={d} p={p} k={k}",
                        "single-vertex term of the k-th central moment at lam = 1",
                        {"d": d, "p": p, "k": k}, c2, c, math.isclose(c, c2, rel_tol=1e-12))
    for lam, p in grid:
        prm = ModelParams(6, 1, lam, p)
        a_exact = clusters.second_order_coefficient(prm)
        log.add("second-order constant", "a(lam,p) in the expectation formula",
                {"lambda": lam, "p": p}, float(a_exact), asymptotics.second_order_a(float(lam), float(p)),
                math.isclose(float(a_exact), asymptotics.second_order_a(float(lam), float(p)),
                             rel_tol=1e-12, abs_tol=1e-15))
    log.add("threshold at lam=1", "central-moment threshold", {"lambda": 1}, 2 / 3,
            asymptotics.threshold_p(1.0), math.isclose(asymptotics.threshold_p(1.0), 2 / 3))


def verify_mc(log: CheckLog, cfg: RunConfig) -> None:
    prm = ModelParams(3, 1, 1, Fraction(1, 2))
    n = max(cfg.samples, 2000)
    est = montecarlo.run_mc(prm, n, cfg.seed, "exact")
    se = math.sqrt(est.variance / n)
    log.add("mc mean d=3", "unbiasedness of the sampled partition function",
            {"d": 3, "p": "1/2", "samples": n, "seed": cfg.seed}, 1.0, est.mean,
            abs(est.mean - 1.0) <= 5 * se)
    a = montecarlo.sample_log2_values(prm, 64, cfg.seed, 1)
    b = montecarlo.sample_log2_values(prm, 64, cfg.seed, 2)
    log.add("worker independence", "per-sample values do not depend on worker count",
            {"d": 3, "samples": 64, "workers": [1, 2]}, a.tolist(), b.tolist())


VERIFIERS = {"identities": verify_identities, "polymers": verify_polymers,
             "clusters": verify_clusters, "formulas": verify_formulas, "mc": verify_mc}


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    suite = cfg.extra.get("suite")
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    log = CheckLog()
    VERIFIERS[suite](log, cfg)
    failed = [c["name"] for c in log.checks if not c["passed"]]
    return ({"suite": suite, "passed": log.passed, "check_count": len(log.checks),
             "failed": failed, "checks": log.checks}, 0 if log.passed else 1)


# ---------------------------------------------------------------- plumbing

COMMANDS = {"exact": cmd_exact, "polymer": cmd_polymer, "cluster": cmd_cluster,
            "asym": cmd_asym, "mc": cmd_mc, "table": cmd_table}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, default=3)
    common.add_argument("--k", type=int, default=1)
    common.add_argument("--lambda", dest="lam", default="1", help="fugacity, e.g. 1 or 1/2")
    common.add_argument("--p", default="1/2", help="edge retention probability, e.g. 3/4")
    common.add_argument("--order", type=int, default=2)
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--ledger", default=os.environ.get("QDP_LEDGER"),
                        help="append a JSON-lines record of the run to this file")

    ap = argparse.ArgumentParser(prog="qdp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    s = sub.add_parser("exact", parents=[common], help="exact partition functions on Q_d")
    s.add_argument("--op", default="independent-sets",
                   choices=("independent-sets", "hardcore", "postemp", "ksystem"))
    s.add_argument("--algorithm", default="direct", choices=("direct", "edge_subsets"))
    s = sub.add_parser("polymer", parents=[common], help="polymer enumeration and weights")
    s.add_argument("--scenario", choices=polymers.SCENARIOS)
    s.add_argument("--defects", help="side string such as EO")
    s = sub.add_parser("cluster", parents=[common], help="truncated cluster expansion")
    s.add_argument("--defects")
    s.add_argument("--mode", default="symmetry", choices=("symmetry", "direct"))
    s.add_argument("--coefficients", action="store_true")
    s = sub.add_parser("asym", parents=[common], help="evaluate an asymptotic formula")
    s.add_argument("--formula", default="expectation", choices=sorted(asymptotics.REGISTRY))
    s = sub.add_parser("mc", parents=[common], help="Monte Carlo moment estimates")
    s.add_argument("--reference", default="exact", choices=("exact", "formula"))
    s.add_argument("--warmup", type=int, default=None, metavar="K")
    s.add_argument("--probe", action="store_true", help="standardized moments only")
    s = sub.add_parser("verify", parents=[common], help="run a cross-check suite")
    s.add_argument("--suite", required=True, choices=SUITES)
    s = sub.add_parser("table", parents=[common], help="grid evaluation of formulas")
    s.add_argument("--formulas", default="expectation_lambda_one",
                   help="comma-separated ids: " + ",".join(sorted(asymptotics.REGISTRY)) + ",exact_count")
    s.add_argument("--d-grid", default="3:12", help="a:b or comma list")
    s.add_argument("--p-grid", default="1/2,7/10,9/10")
    s.add_argument("--lambda-grid", default=None)
    s.add_argument("--k-grid", default=None)
    return ap


_CORE = {"subcommand", "d", "k", "lam", "p", "order", "samples", "seed", "workers", "out",
         "format", "ledger"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    extra = {k: v for k, v in vars(ns).items() if k not in _CORE and v is not None}
    budgets = asdict(Budgets.current())
    return RunConfig(ns.subcommand, ns.d, ns.k, ns.lam, ns.p, ns.order, ns.samples, ns.seed,
                     ns.workers, budgets, ns.out, ns.format, extra)


def _append_ledger(path: str, cfg: RunConfig, text: str) -> None:
    rec = {"config_hash": cfg.digest(), "result_digest": hashlib.sha256(text.encode()).hexdigest(),
           "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
           "subcommand": cfg.subcommand}
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")


def run(cfg: RunConfig) -> tuple[str, int]:
    """Execute a config; returns (rendered output, exit code)."""
    ModelParams(cfg.d, cfg.k, Fraction(cfg.lam), Fraction(cfg.p))
    if cfg.subcommand == "verify":
        result, code = cmd_verify(cfg)
    else:
        result, code = COMMANDS[cfg.subcommand](cfg), 0
    if cfg.format == "csv":
        rows = result.get("rows") if "rows" in result else [
            {k: v for k, v in _jsonable(result).items() if not isinstance(v, (dict, list))}]
        return rows_to_csv(_jsonable(rows)), code
    doc = {"schema": SCHEMA, "config": cfg.to_json(), "result": _jsonable(result)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n", code


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        text, code = run(cfg)
    except (BudgetExceeded, ValueError, ZeroDivisionError) as exc:
        print(json.dumps({"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if ns.ledger:
        _append_ledger(ns.ledger, cfg, text)
    if code == 1:
        failed = json.loads(text)["result"]["failed"] if cfg.format == "json" else []
        print("verification failed: " + ", ".join(failed), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
