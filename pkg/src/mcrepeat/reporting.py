"""Serialization of evaluation reports and report-to-report comparison.

Floats are written with 9 significant digits so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import McRepeatError
from .evaluation import METRIC_NAMES, EvaluationReport
from .stats import ALPHA, shapiro_wilk, welch_t_test

SIG_DIGITS = 9


def fmt_float(x) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{float(x):.{SIG_DIGITS}g}"


def jsonable(obj):
    """Recursively convert to JSON types, rounding floats to 9 significant digits."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2) + "\n"


def report_to_dict(report: EvaluationReport) -> dict:
    metrics = {}
    for name in METRIC_NAMES:
        res = report.metrics.get(name)
        if res is None:
            metrics[name] = None
            continue
        metrics[name] = {
            "value": res.point_estimate,
            "ci_low": res.ci_low,
            "ci_high": res.ci_high,
            "samples": res.samples,
        }
    rep = report.repeatability
    out = {
        "head": {"variant": report.head.variant.value, "k": report.head.k},
        "n_mc": report.n_mc,
        "deterministic": report.deterministic,
        "n_images": report.n_images,
        "n_sessions": report.n_sessions,
        "n_test_retest_sessions": report.n_test_retest_sessions,
        "bootstrap": {"iterations": report.bootstrap_iterations, "seed": report.seed},
        "metrics": metrics,
        "limits_of_agreement": None
        if rep is None
        else {
            "low": rep.loa_low,
            "high": rep.loa_high,
            "value_range": rep.value_range,
            "halfwidth_normalized": rep.loa_halfwidth_normalized,
            "width_normalized": rep.loa_width_normalized,
            "maxabs_normalized": rep.loa_maxabs_normalized,
            "n_skipped_sessions": rep.n_skipped,
        },
        "confusion_matrix": report.confusion.to_dict(),
        "calibration": None
        if report.calibration is None
        else {
            "brier": report.calibration.brier,
            "positive_from": report.positive_from,
            "n_bins": report.n_bins,
            "bins": [
                {
                    "bin_low": b.bin_low,
                    "bin_high": b.bin_high,
                    "mean_predicted": b.mean_predicted,
                    "empirical_frequency": b.empirical_frequency,
                    "count": b.count,
                }
                for b in report.calibration.bins
            ],
        },
    }
    if report.extra:
        out["extra"] = report.extra
    return out


def write_report(report: EvaluationReport | dict, path) -> Path:
    path = Path(path)
    data = report if isinstance(report, dict) else report_to_dict(report)
    path.write_text(dumps(data), encoding="utf-8")
    return path


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_bland_altman_csv(report: EvaluationReport, path) -> Path:
    path = Path(path)
    points = report.repeatability.points if report.repeatability else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "session_id", "mean", "diff"])
        for p in points:
            w.writerow([p.subject_id, p.session_id, fmt_float(p.mean_score), fmt_float(p.diff)])
    return path


def write_calibration_csv(report: EvaluationReport, path) -> Path:
    path = Path(path)
    bins = report.calibration.bins if report.calibration else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "mean_predicted", "empirical_frequency", "count"])
        for b in bins:
            w.writerow(
                [fmt_float(b.bin_low), fmt_float(b.bin_high), fmt_float(b.mean_predicted),
                 fmt_float(b.empirical_frequency), b.count]
            )
    return path


def _normality_p(samples) -> float | None:
    """Shapiro-Wilk p-value of a bootstrap distribution, or None when it cannot be computed."""
    try:
        return shapiro_wilk(samples).p_value
    except McRepeatError:
        return None


def compare_reports(report_a: dict, report_b: dict, alpha: float = ALPHA) -> dict:
    """Welch t-test between the bootstrap distributions of every shared metric.

    Both arguments are report dictionaries as produced by :func:`report_to_dict`
    (or read back from JSON). Each row also carries the Shapiro-Wilk p-value of
    both bootstrap distributions so the normality assumption can be checked.
    """
    ma, mb = report_a.get("metrics"), report_b.get("metrics")
    if not isinstance(ma, dict) or not isinstance(mb, dict):
        raise McRepeatError("reports must contain a 'metrics' section")
    if set(ma) != set(mb):
        raise McRepeatError(f"mismatched metric sets: {sorted(ma)} vs {sorted(mb)}")
    out = {}
    for name in ma:
        a, b = ma[name], mb[name]
        if a is None and b is None:
            out[name] = None
            continue
        if a is None or b is None or "samples" not in a or "samples" not in b:
            raise McRepeatError(f"metric {name!r} lacks bootstrap samples in one report")
        test = welch_t_test(a["samples"], b["samples"])
        out[name] = {
            "value_a": a["value"],
            "value_b": b["value"],
            "mean_a": float(np.mean(a["samples"])),
            "mean_b": float(np.mean(b["samples"])),
            "statistic": test.statistic,
            "p_value": test.p_value,
            "significant": bool(test.p_value < alpha),
            "normality_p_a": _normality_p(a["samples"]),
            "normality_p_b": _normality_p(b["samples"]),
        }
    return {"alpha": alpha, "test": "welch_t", "metrics": out}
