"""
Agreement, calibration and comparing two models
===============================================

Repeatability is only half the story: a model can be perfectly repeatable
and still wrong. This script computes the accuracy-side metrics (quadratic
weighted kappa, Brier score, a reliability curve) and then compares two
models with a bootstrap plus Welch's t-test.

Run with ``python3 demos/metrics_and_statistics.py``.
"""

import numpy as np

from mcrepeat import ConfusionMatrix, bootstrap_metric, brier_score, calibration_curve
from mcrepeat import quadratic_weighted_kappa, shapiro_wilk, welch_t_test

rng = np.random.default_rng(7)

# %%
# Quadratic weighted kappa
# ------------------------
# Mistakes between neighbouring grades cost little; mistakes across the
# scale cost a lot. The weights are ``(i - j)^2 / (k - 1)^2``.

near = ConfusionMatrix(np.array([[40, 8, 0], [6, 30, 5], [0, 7, 35]]))
far = ConfusionMatrix(np.array([[40, 0, 8], [6, 30, 5], [7, 0, 35]]))
print(f"kappa, errors between neighbours: {quadratic_weighted_kappa(near):.3f}")
print(f"kappa, errors across the scale:   {quadratic_weighted_kappa(far):.3f}")

# %%
# Brier score and reliability
# ---------------------------
# Draw outcomes from known probabilities. A calibrated model reports those
# probabilities; an overconfident one pushes them towards 0 and 1.

true_p = rng.uniform(0, 1, size=2000)
y = (rng.uniform(size=true_p.size) < true_p).astype(int)
overconfident = np.clip(0.5 + 1.8 * (true_p - 0.5), 0, 1)
print(f"Brier, calibrated:    {brier_score(y, true_p):.4f}")
print(f"Brier, overconfident: {brier_score(y, overconfident):.4f}")

print("bin          predicted  observed  count")
for b in calibration_curve(y, overconfident, n_bins=5):
    print(f"[{b.bin_low:.1f}, {b.bin_high:.1f})  {b.mean_predicted:9.3f}  {b.empirical_frequency:8.3f}  {b.count:5d}")

# %%
# Bootstrap over patients
# -----------------------
# Resampling units (patients) with replacement gives a sampling distribution
# for any metric. Each iteration has its own random stream derived from the
# seed, so the same seed always reproduces the same distribution.

correct_a = rng.uniform(size=150) < 0.85
correct_b = rng.uniform(size=150) < 0.78
boot_a = bootstrap_metric(correct_a, np.mean, iterations=500, seed=1)
boot_b = bootstrap_metric(correct_b, np.mean, iterations=500, seed=1)
print(f"model A accuracy {boot_a.point_estimate:.3f}  95% CI [{boot_a.ci_low:.3f}, {boot_a.ci_high:.3f}]")
print(f"model B accuracy {boot_b.point_estimate:.3f}  95% CI [{boot_b.ci_low:.3f}, {boot_b.ci_high:.3f}]")

# %%
# Comparing the two bootstrap distributions
# -----------------------------------------
# Welch's t-test does not assume equal variances. It assumes roughly normal
# samples, which Shapiro-Wilk lets us check first.

for name, boot in (("A", boot_a), ("B", boot_b)):
    sw = shapiro_wilk(boot.samples)
    print(f"Shapiro-Wilk on model {name}: W={sw.statistic:.4f}  p={sw.p_value:.3f}")

# %%
# A bootstrapped proportion only takes values ``j / 150``, so with 500 draws
# Shapiro-Wilk may reject normality for a histogram that looks bell-shaped.
# With this many samples per group the t-test is robust to that.

test = welch_t_test(boot_a.samples, boot_b.samples)
print(f"Welch t={test.statistic:.2f}  p={test.p_value:.2e}  significant={test.significant}")
