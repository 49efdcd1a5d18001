"""Collector configuration: which checkpoints to score, and how to sample.

The collector consumes pre-tokenized indexed datasets (2-D integer arrays
of shape ``(rows, sequence_length)``) whose training rows are laid out in
training order: batch ``t`` (1-based) occupies rows
``[(t-1) * batch_size, t * batch_size)``. Treatment steps partition the
batch axis into macro-batches: the macro-batch at step ``g`` covers the
batches after the previous treatment step up to and including ``g``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Union


class CollectorError(ValueError):
    """Configuration, sampling, or scoring contract violation."""


class Metric(str, Enum):
    LOGLIK = "loglik"
    TOKEN_ACC = "token_acc"
    TOKEN_RANK = "token_rank"


@dataclass(frozen=True)
class CheckpointRef:
    """One scored checkpoint: an opaque identifier (e.g. a model directory
    for the transformers backend) and its training-step number."""

    id: str
    step: int

    def __post_init__(self) -> None:
        if self.step < 0:
            raise CollectorError(f"checkpoint step must be non-negative, got {self.step}")


@dataclass(frozen=True)
class CollectorConfig:
    checkpoints: tuple[CheckpointRef, ...]
    treatment_grid: tuple[int, ...]
    batches_per_macrobatch: int = 10
    instances_per_batch: int = 10
    n_validation: int = 2000
    metric: Metric = Metric.LOGLIK
    sequence_length: int = 2049
    batch_size_sequences: int = 1024
    precision: str = "float32"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.checkpoints:
            raise CollectorError("no checkpoints configured")
        steps = [c.step for c in self.checkpoints]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise CollectorError("checkpoint steps must be strictly increasing")
        tg = tuple(int(g) for g in self.treatment_grid)
        if not tg or tg[0] <= 0 or any(b <= a for a, b in zip(tg, tg[1:])):
            raise CollectorError("treatment grid must be strictly increasing positive steps")
        object.__setattr__(self, "treatment_grid", tg)
        for name in ("batches_per_macrobatch", "instances_per_batch", "n_validation",
                     "sequence_length", "batch_size_sequences"):
            if getattr(self, name) <= 0:
                raise CollectorError(f"{name} must be positive")
        if self.instances_per_batch > self.batch_size_sequences:
            raise CollectorError(
                f"cannot sample {self.instances_per_batch} instances from batches of "
                f"{self.batch_size_sequences} sequences"
            )
        if self.precision not in ("float32", "bfloat16", "float16"):
            raise CollectorError(f"unsupported precision {self.precision!r}")

    def macro_batch_ranges(self) -> list[tuple[int, int, int]]:
        """(g, first_batch, last_batch) with batches 1-based and inclusive."""
        out = []
        prev = 0
        for g in self.treatment_grid:
            out.append((g, prev + 1, g))
            prev = g
        return out

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "checkpoints": [{"id": c.id, "step": c.step} for c in self.checkpoints],
            "treatment_grid": list(self.treatment_grid),
            "batches_per_macrobatch": self.batches_per_macrobatch,
            "instances_per_batch": self.instances_per_batch,
            "n_validation": self.n_validation,
            "metric": self.metric.value,
            "sequence_length": self.sequence_length,
            "batch_size_sequences": self.batch_size_sequences,
            "precision": self.precision,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, payload: dict[str, Any]) -> "CollectorConfig":
        data = dict(payload)
        data["checkpoints"] = tuple(
            CheckpointRef(id=str(c["id"]), step=int(c["step"])) for c in data["checkpoints"]
        )
        data["treatment_grid"] = tuple(data["treatment_grid"])
        data["metric"] = Metric(data.get("metric", "loglik"))
        return cls(**data)


def load_config(path: Union[str, Path]) -> CollectorConfig:
    return CollectorConfig.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
