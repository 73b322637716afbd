"""Test-retest repeatability evaluation for Monte Carlo dropout models."""

from .errors import (
    InsufficientSamplesError,
    McRepeatError,
    MissingLabelsError,
    SchemaError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .evaluation import EvaluationReport, evaluate, score_records
from .metrics import ConfusionMatrix, brier_score, calibration_curve, quadratic_weighted_kappa
from .records import DETERMINISTIC, HeadKind, PredictionRecord, RecordSet, load_labels, load_records
from .repeatability import disagreement_rate, limits_of_agreement, repeatability_report
from .reporting import compare_reports, read_report, write_report
from .scoring import aggregate_mc, assign_class, normalize_score, severity_score
from .stats import bootstrap_metric, shapiro_wilk, welch_t_test

__version__ = "0.1.0"
