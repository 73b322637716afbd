import json
import math

import numpy as np
import pytest

from mcrepeat.errors import McRepeatError, MissingLabelsError
from mcrepeat.evaluation import METRIC_NAMES, Evaluator, evaluate, score_records
from mcrepeat.records import DETERMINISTIC, HeadKind, PredictionRecord
from mcrepeat.reporting import (
    compare_reports,
    dumps,
    fmt_float,
    jsonable,
    read_report,
    report_to_dict,
    write_bland_altman_csv,
    write_calibration_csv,
    write_report,
)


def synthetic_records(head, n_subjects=30, n_mc=5, seed=0, noise=0.1):
    """Two images per subject; MC rows jitter around a subject-level probability."""
    rng = np.random.default_rng(seed)
    records, labels = [], {}
    for s in range(n_subjects):
        subj = f"p{s:03d}"
        y = int(rng.integers(0, 2 if head.variant.value == "binary" else head.k))
        for img in ("a", "b"):
            labels[(subj, "v1", img)] = y
            for m in [*range(n_mc), DETERMINISTIC]:
                if head.variant.value == "binary":
                    p = float(np.clip(0.25 + 0.5 * y + rng.normal(0, noise), 0, 1))
                    out = (p,)
                else:
                    logits = 2.0 * np.eye(head.k)[y] + rng.normal(0, noise * 5, head.k)
                    out = tuple((np.exp(logits) / np.exp(logits).sum()).tolist())
                records.append(PredictionRecord(subj, "v1", img, head, m, out))
    return records, labels


@pytest.fixture(scope="module")
def multiclass():
    return synthetic_records(HeadKind.multiclass(3))


class TestEvaluate:
    def test_all_metrics_present(self, multiclass):
        recs, labels = multiclass
        rep = evaluate(recs, labels, n_mc=5, bootstrap_iters=30, seed=1)
        assert set(rep.metrics) == set(METRIC_NAMES)
        for name, res in rep.metrics.items():
            assert res.ci_low <= res.ci_high, name
            assert len(res.samples) == 30
        assert rep.n_test_retest_sessions == 30 and rep.n_images == 60

    def test_seed_determinism(self, multiclass):
        recs, labels = multiclass
        a = dumps(report_to_dict(evaluate(recs, labels, n_mc=5, bootstrap_iters=20, seed=3)))
        b = dumps(report_to_dict(evaluate(recs, labels, n_mc=5, bootstrap_iters=20, seed=3)))
        assert a == b

    def test_point_values_match_direct_computation(self, multiclass):
        recs, labels = multiclass
        rep = evaluate(recs, labels, n_mc=5, bootstrap_iters=5)
        scored = score_records(recs, n_mc=5)
        y = np.array([labels[k] for k in scored.keys])
        assert rep.metrics["accuracy"].point_estimate == pytest.approx(np.mean(scored.classes == y))
        by_subject = scored.classes.reshape(-1, 2)
        assert rep.metrics["disagreement_rate"].point_estimate == pytest.approx(
            np.mean(by_subject[:, 0] != by_subject[:, 1])
        )
        brier = np.mean(np.sum((scored.outputs - np.eye(3)[y]) ** 2, axis=1))
        assert rep.metrics["brier"].point_estimate == pytest.approx(brier, abs=1e-12)

    def test_deterministic_rows_selected(self, multiclass):
        recs, labels = multiclass
        rep = evaluate(recs, labels, bootstrap_iters=5, deterministic=True)
        assert rep.deterministic and rep.n_mc is None
        only_det = [r for r in recs if r.deterministic]
        auto = evaluate(only_det, labels, bootstrap_iters=5)
        assert auto.deterministic
        assert auto.metrics["loa"].point_estimate == rep.metrics["loa"].point_estimate

    def test_missing_labels_lists_images(self, multiclass):
        recs, labels = multiclass
        partial = dict(labels)
        del partial[("p003", "v1", "b")]
        with pytest.raises(MissingLabelsError, match="p003/v1/b"):
            evaluate(recs, partial, n_mc=5, bootstrap_iters=5)

    def test_too_many_mc_requested(self, multiclass):
        recs, labels = multiclass
        with pytest.raises(McRepeatError, match="MC samples"):
            evaluate(recs, labels, n_mc=6, bootstrap_iters=5)

    def test_regression_has_no_brier(self):
        head = HeadKind.regression(3)
        recs, labels = [], {}
        for s in range(10):
            for img, v in (("a", s / 5), ("b", s / 5 + 0.1)):
                recs.append(PredictionRecord(f"s{s}", "v", img, head, 0, (v,)))
                labels[(f"s{s}", "v", img)] = min(int(s / 5 * 1.5), 2)
        rep = evaluate(recs, labels, n_mc=1, bootstrap_iters=10)
        assert rep.metrics["brier"] is None and rep.calibration is None
        # constant offset: the interval collapses to a point at -0.1
        assert rep.metrics["loa"].point_estimate == pytest.approx(0.0, abs=1e-12)
        assert rep.repeatability.loa_low == pytest.approx(-0.1)
        assert rep.repeatability.loa_maxabs_normalized == pytest.approx(0.1 / 2.0)

    def test_bootstrap_resamples_sessions_not_images(self, multiclass):
        recs, labels = multiclass
        ev = Evaluator(score_records(recs, n_mc=5), labels)
        # duplicating a session index duplicates both of its images
        cm = ev.confusion(np.array([0, 0]))
        assert cm.total == 4


class TestReporting:
    def test_fmt_float(self):
        assert fmt_float(1 / 3) == "0.333333333"
        assert fmt_float(float("nan")) == "" and fmt_float(None) == ""

    def test_jsonable_rounds_and_nulls(self):
        out = jsonable({"a": np.float64(2 / 3), "b": [np.inf, np.int64(4)], "c": np.array([0.1])})
        assert out == {"a": 0.666666667, "b": [None, 4], "c": [0.1]}

    def test_round_trip(self, multiclass, tmp_path):
        recs, labels = multiclass
        rep = evaluate(recs, labels, n_mc=5, bootstrap_iters=10)
        path = write_report(rep, tmp_path / "r.json")
        back = read_report(path)
        assert back == json.loads(dumps(report_to_dict(rep)))
        assert list(back["metrics"]) == list(METRIC_NAMES)

    def test_side_csvs(self, multiclass, tmp_path):
        recs, labels = multiclass
        rep = evaluate(recs, labels, n_mc=5, bootstrap_iters=5)
        ba = write_bland_altman_csv(rep, tmp_path / "ba.csv").read_text().splitlines()
        assert ba[0] == "subject_id,session_id,mean,diff" and len(ba) == 31
        cal = write_calibration_csv(rep, tmp_path / "cal.csv").read_text().splitlines()
        assert cal[0].startswith("bin_low,bin_high") and len(cal) == 11

    def test_compare_self(self, multiclass):
        recs, labels = multiclass
        d = report_to_dict(evaluate(recs, labels, n_mc=5, bootstrap_iters=40))
        cmp = compare_reports(d, d)
        for name, row in cmp["metrics"].items():
            assert row["p_value"] == 1.0 and not row["significant"], name

    def test_compare_unequal_iterations(self, multiclass):
        recs, labels = multiclass
        a = report_to_dict(evaluate(recs, labels, n_mc=5, bootstrap_iters=40, seed=1))
        b = report_to_dict(evaluate(recs, labels, bootstrap_iters=25, seed=2, deterministic=True))
        cmp = compare_reports(a, b)
        assert all(0.0 <= r["p_value"] <= 1.0 for r in cmp["metrics"].values())

    def test_compare_mismatched_metrics(self, multiclass):
        recs, labels = multiclass
        a = report_to_dict(evaluate(recs, labels, n_mc=5, bootstrap_iters=5))
        b = json.loads(json.dumps(jsonable(a)))
        del b["metrics"]["brier"]
        with pytest.raises(McRepeatError, match="mismatched"):
            compare_reports(a, b)

    def test_compare_separated_binary(self):
        good, labels = synthetic_records(HeadKind.binary(), noise=0.02, seed=1)
        noisy, _ = synthetic_records(HeadKind.binary(), noise=0.3, seed=1)
        a = report_to_dict(evaluate(good, labels, n_mc=5, bootstrap_iters=100))
        b = report_to_dict(evaluate(noisy, labels, n_mc=5, bootstrap_iters=100))
        row = compare_reports(a, b)["metrics"]["loa"]
        assert row["value_a"] < row["value_b"] and row["significant"]
        assert math.isfinite(row["statistic"])
