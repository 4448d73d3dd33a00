"""CLI entry points, dataset manifests, metrics, and report emission."""

from patscout.harness.dataset import Adjudications, DatasetCase, load_adjudications, load_manifest
from patscout.harness.metrics import EvaluationMetrics, evaluate, match_report, metrics_from_counts
from patscout.harness.sarif import emit_sarif, validate_sarif

__all__ = [
    "Adjudications",
    "DatasetCase",
    "EvaluationMetrics",
    "emit_sarif",
    "evaluate",
    "load_adjudications",
    "load_manifest",
    "match_report",
    "metrics_from_counts",
    "validate_sarif",
]
