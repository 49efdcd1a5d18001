"""Checkpoint scoring: one outcome per sampled instance per checkpoint.

Scoring is embarrassingly parallel across checkpoints; jobs carry dataset
paths and row offsets (not arrays), so they cross process boundaries
cheaply and each worker memory-maps its own view. Output order is fixed
by the sample list regardless of scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .config import CheckpointRef, CollectorConfig, CollectorError, Metric
from .metrics import PerfectScorer, SequenceScorer, UniformScorer, score_sequence
from .sampling import SampledInstance


def score_checkpoint(scorer: SequenceScorer, sequences: np.ndarray,
                     metric: Metric, sequence_length: int) -> np.ndarray:
    """Score each row of ``sequences`` under one checkpoint's model.

    Rows must have exactly ``sequence_length`` tokens; each yields one
    finite real in the metric's range.
    """
    sequences = np.asarray(sequences)
    if sequences.ndim != 2 or sequences.shape[1] != sequence_length:
        raise CollectorError(
            f"sequence-length mismatch: data rows have {sequences.shape[-1]} tokens, "
            f"config says {sequence_length}"
        )
    out = np.empty(len(sequences), dtype=np.float64)
    for i, row in enumerate(sequences):
        out[i] = score_sequence(scorer, row, metric)
        if not np.isfinite(out[i]):
            raise CollectorError(f"non-finite outcome for row {i}")
    return out


def make_scorer(backend: str, checkpoint: CheckpointRef, vocab_size: int | None,
                precision: str) -> SequenceScorer:
    """Instantiate a scorer; ``backend`` is ``hf`` or a stub name.

    Stubs (``stub:perfect``, ``stub:uniform``) need an explicit vocab
    size and ignore the checkpoint id; the ``hf`` backend loads the
    checkpoint id as a transformers causal LM directory.
    """
    if backend == "hf":
        from .hf import TransformersScorer

        return TransformersScorer(checkpoint.id, precision=precision)
    if backend in ("stub:perfect", "stub:uniform"):
        if vocab_size is None:
            raise CollectorError("stub backends need an explicit vocab size")
        cls = PerfectScorer if backend == "stub:perfect" else UniformScorer
        return cls(vocab_size)
    raise CollectorError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class _Job:
    backend: str
    checkpoint: CheckpointRef
    data_paths: tuple[str, str]  # (train, valid)
    train_offsets: tuple[int, ...]
    valid_offsets: tuple[int, ...]
    metric: Metric
    sequence_length: int
    precision: str
    vocab_size: int | None


def _gather_rows(job: _Job) -> np.ndarray:
    train = np.load(job.data_paths[0], mmap_mode="r")
    valid = np.load(job.data_paths[1], mmap_mode="r")
    rows = np.concatenate([
        np.asarray(train[list(job.train_offsets)]),
        np.asarray(valid[list(job.valid_offsets)]),
    ])
    return rows


def _run_job(job: _Job) -> np.ndarray:
    scorer = make_scorer(job.backend, job.checkpoint, job.vocab_size, job.precision)
    return score_checkpoint(scorer, _gather_rows(job), job.metric, job.sequence_length)


def score_suite(config: CollectorConfig, samples: Sequence[SampledInstance],
                train_path: Union[str, Path], valid_path: Union[str, Path],
                backend: str = "hf", vocab_size: int | None = None,
                workers: int = 1) -> dict[int, np.ndarray]:
    """Score every configured checkpoint; returns step -> outcome column.

    Columns align with ``samples`` order. With ``workers > 1``
    checkpoints are scored in separate processes; results are identical
    to the serial path.
    """
    train_offsets = tuple(s.offset for s in samples if s.group is not None)
    valid_offsets = tuple(s.offset for s in samples if s.group is None)
    # samples list training rows first, then validation (sampling order)
    if list(s.group is None for s in samples) != [False] * len(train_offsets) + [True] * len(valid_offsets):
        raise CollectorError("samples must list training instances before validation")

    jobs = [
        _Job(backend=backend, checkpoint=ckpt,
             data_paths=(str(train_path), str(valid_path)),
             train_offsets=train_offsets, valid_offsets=valid_offsets,
             metric=config.metric, sequence_length=config.sequence_length,
             precision=config.precision, vocab_size=vocab_size)
        for ckpt in config.checkpoints
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_run_job, jobs))
    else:
        columns = [_run_job(job) for job in jobs]
    return {ckpt.step: col for ckpt, col in zip(config.checkpoints, columns)}
