"""
Severity scores, Bland-Altman limits and disagreement
=====================================================

Two scans of the same patient taken minutes apart should get the same
grade. This walk-through builds prediction records by hand for a small
three-class problem, turns them into severity scores, and measures how far
apart the two scans of each patient land.

Run with ``python3 demos/scoring_and_repeatability.py``.
"""

import numpy as np

from mcrepeat import DETERMINISTIC, HeadKind, PredictionRecord, evaluate
from mcrepeat.scoring import aggregate_mc, assign_class, normalize_score, severity_score

# %%
# One image, four heads
# ---------------------
# Every head maps its raw outputs to a score on ``[0, k-1]``. A multi-class
# head uses the probability-weighted class index, an ordinal (CORAL) head
# sums its cumulative probabilities, and a regression head reports its value
# directly.

k = 3
examples = {
    HeadKind.binary(): (0.7,),
    HeadKind.multiclass(k): (0.1, 0.3, 0.6),
    HeadKind.ordinal(k): (0.9, 0.4),
    HeadKind.regression(k): (1.4,),
}
for head, outputs in examples.items():
    rec = PredictionRecord("p1", "v1", "a", head, DETERMINISTIC, outputs)
    agg = aggregate_mc([rec], n_use=None)
    s = severity_score(agg)
    print(f"{head.variant.value:>10}  outputs={outputs}  score={s.value:.2f}  "
          f"normalized={normalize_score(s):.2f}  class={assign_class(agg)}")

# %%
# Averaging Monte Carlo samples
# -----------------------------
# With dropout left on at inference, each image gets several stochastic
# forward passes. The first ``n_use`` passes (by ``mc_index``) are averaged
# before scoring.

rng = np.random.default_rng(0)
head = HeadKind.multiclass(k)
passes = rng.dirichlet([2.0, 4.0, 3.0], size=50)
rows = [PredictionRecord("p1", "v1", "a", head, m, tuple(p)) for m, p in enumerate(passes)]
for n in (1, 5, 50):
    agg = aggregate_mc(rows, n_use=n)
    print(f"N={n:>2}  mean probabilities={np.round(agg.outputs, 3)}  score={severity_score(agg).value:.3f}")

# %%
# A small test-retest cohort
# --------------------------
# Forty patients, two images each. Each image's multi-class probabilities
# jitter around the patient's true grade, and ten MC passes are drawn per
# image.

records, labels = [], {}
for s in range(40):
    subject = f"p{s:02d}"
    grade = s % k
    for image in ("scan1", "scan2"):
        labels[subject, "v1", image] = grade
        centre = 1.5 * np.eye(k)[grade] + rng.normal(0, 0.8, size=k)
        for m in range(10):
            logits = centre + rng.normal(0, 0.5, size=k)
            p = np.exp(logits) / np.exp(logits).sum()
            records.append(PredictionRecord(subject, "v1", image, head, m, tuple(p)))

report = evaluate(records, labels, n_mc=10, bootstrap_iters=200, seed=1)
rep = report.repeatability

# %%
# The Bland-Altman view plots, per patient, the mean of the two scores
# against their difference. The 95% limits of agreement are the 2.5th and
# 97.5th percentiles of the differences, and the reported ``loa`` is their
# half-width as a fraction of the score range.

for point in rep.points[:5]:
    print(f"{point.subject_id}  mean={point.mean_score:.3f}  diff={point.diff:+.3f}")
print(f"limits of agreement: [{rep.loa_low:+.3f}, {rep.loa_high:+.3f}] on a range of {rep.value_range:.0f}")
print(f"normalized half-width: {rep.loa_halfwidth_normalized:.3f}")
print(f"patients whose two scans got different grades: {rep.disagreement_rate:.1%}")

# %%
# Every metric also comes with a bootstrap interval obtained by resampling
# patients, so both scans of a patient always travel together.

for name, res in report.metrics.items():
    if res is not None:
        print(f"{name:>18}  {res.point_estimate:.3f}  [{res.ci_low:.3f}, {res.ci_high:.3f}]")
