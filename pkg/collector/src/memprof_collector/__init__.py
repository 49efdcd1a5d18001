"""Panel collection from pretrained checkpoint suites.

Samples instances per macro-batch from a pre-tokenized training set,
scores them (and a held-out validation sample) at every configured
checkpoint, and writes the PanelFile CSV consumed by the memprof engine.
This package never computes estimates; statistics live engine-side.
"""

from .config import CheckpointRef, CollectorConfig, CollectorError, Metric, load_config
from .emit import emit_panel, run_manifest, write_manifest
from .metrics import (PerfectScorer, SequenceScorer, TabularScorer,
                      UniformScorer, metric_from_logits, score_sequence)
from .sampling import SampledInstance, sample_instances
from .scoring import make_scorer, score_checkpoint, score_suite

__version__ = "0.1.0"

__all__ = [
    "CheckpointRef", "CollectorConfig", "CollectorError", "Metric", "load_config",
    "SampledInstance", "sample_instances",
    "SequenceScorer", "PerfectScorer", "UniformScorer", "TabularScorer",
    "metric_from_logits", "score_sequence",
    "score_checkpoint", "score_suite", "make_scorer",
    "emit_panel", "run_manifest", "write_manifest",
]
