"""Write CSV tables of the asymptotic evaluators next to exact counts.

Usage: python3 scripts/formula_tables.py [--out tables]
"""

import argparse
from fractions import Fraction
from pathlib import Path

from qdp.asymptotics import half_probability_expectation, half_probability_variance
from qdp.cli import rows_to_csv, table_rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tables")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(exist_ok=True)
    ps = [Fraction(1, 2), Fraction(7, 10), Fraction(9, 10), Fraction(1)]
    rows = table_rows(["expectation_lambda_one", "moment_ratio"], range(3, 21), ps, [Fraction(1)], [2])
    (out / "expectation.csv").write_text(rows_to_csv(rows), newline="")
    rows = table_rows(["classical_count", "exact_count"], range(1, 6), [Fraction(1)], [Fraction(1)], [1])
    (out / "classical.csv").write_text(rows_to_csv(rows), newline="")
    half = []
    for d in range(5, 31):
        half.append({"d": d,
                     "mean_log2": half_probability_expectation(d).log2_value,
                     "mean_log2_alt": half_probability_expectation(d, Fraction(91, 9)).log2_value,
                     "var_log2": half_probability_variance(d).log2_value,
                     "var_log2_alt": half_probability_variance(d, Fraction(91, 18), 4).log2_value})
    (out / "half_probability.csv").write_text(rows_to_csv(half), newline="")
    print(f"wrote tables to {out}/")


if __name__ == "__main__":
    main()
