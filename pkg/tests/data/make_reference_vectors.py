"""Regenerate reference_vectors.json from scipy.stats.

Run once; the JSON is committed so tests never depend on scipy's own
Shapiro-Wilk or t-test at test time.
"""

import json
from pathlib import Path

import numpy as np
from scipy import stats


def main():
    rng = np.random.default_rng(20240601)
    shapiro, welch = [], []
    sizes = [3, 4, 5, 7, 10, 11, 12, 20, 35, 50]
    for i, n in enumerate(sizes):
        gen = [rng.normal, rng.exponential][i % 2]
        x = gen(size=n).round(6)
        r = stats.shapiro(x)
        shapiro.append({"x": x.tolist(), "W": float(r.statistic), "p": float(r.pvalue)})
    for n in [40, 100, 200, 500, 1000, 2000, 3000, 4000, 4500, 5000]:
        x = (rng.standard_t(8, size=n)).round(6)
        r = stats.shapiro(x)
        shapiro.append({"x": x.tolist(), "W": float(r.statistic), "p": float(r.pvalue)})
    for i in range(20):
        na, nb = int(rng.integers(5, 40)), int(rng.integers(5, 40))
        a = rng.normal(0.0, rng.uniform(0.5, 2.0), size=na).round(6)
        b = rng.normal(rng.uniform(-1.0, 1.0), rng.uniform(0.5, 2.0), size=nb).round(6)
        r = stats.ttest_ind(a, b, equal_var=False)
        welch.append({"a": a.tolist(), "b": b.tolist(), "t": float(r.statistic), "p": float(r.pvalue)})
    out = Path(__file__).with_name("reference_vectors.json")
    out.write_text(json.dumps({"shapiro": shapiro, "welch": welch}) + "\n")


if __name__ == "__main__":
    main()
