"""PanelFile CSV emission and the run manifest.

The emitted file is the engine-side interchange contract: header
``instance_id,group,checkpoint,outcome``, one row per instance per
checkpoint, ``inf`` for validation instances. Balance is checked before
anything is written, and rows are sorted by (instance id, checkpoint) so
output bytes are independent of scoring order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import IO, Mapping, Sequence, Union

import numpy as np

from .config import CollectorConfig, CollectorError
from .sampling import SampledInstance

PANEL_HEADER = "instance_id,group,checkpoint,outcome"


def emit_panel(config: CollectorConfig, samples: Sequence[SampledInstance],
               scores: Mapping[int, np.ndarray], sink: Union[str, Path, IO[str]]) -> None:
    """Write the scored panel as PanelFile CSV.

    ``scores`` maps checkpoint step to an outcome column aligned with
    ``samples``. A missing or misshapen column fails before any bytes
    are written (no partial files).
    """
    steps = [c.step for c in config.checkpoints]
    for step in steps:
        if step not in scores:
            raise CollectorError(
                f"partial checkpoint set: no scores for checkpoint step {step}; "
                f"panel would be unbalanced"
            )
        col = np.asarray(scores[step], dtype=np.float64)
        if col.shape != (len(samples),):
            raise CollectorError(
                f"scores for step {step} have shape {col.shape}; expected ({len(samples)},)"
            )
        if not np.all(np.isfinite(col)):
            raise CollectorError(f"non-finite outcome in checkpoint step {step}")
    extra = set(scores) - set(steps)
    if extra:
        raise CollectorError(f"scores for unconfigured checkpoint steps {sorted(extra)}")

    lines = [PANEL_HEADER]
    order = sorted(range(len(samples)), key=lambda i: samples[i].instance_id)
    for i in order:
        sample = samples[i]
        for step in steps:
            y = float(scores[step][i])
            lines.append(f"{sample.instance_id},{sample.group_label},{step},{y!r}")
    text = "\n".join(lines) + "\n"

    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def run_manifest(config: CollectorConfig, samples: Sequence[SampledInstance],
                 train_path: Union[str, Path], valid_path: Union[str, Path],
                 backend: str, panel_sha256: str) -> dict:
    """Manifest recording everything that perturbs outcomes."""

    def dataset_entry(path: Union[str, Path]) -> dict:
        data = np.load(path, mmap_mode="r")
        return {
            "path": str(path),
            "rows": int(data.shape[0]),
            "sequence_length": int(data.shape[1]),
            "dtype": str(data.dtype),
            "sha256": hashlib.sha256(Path(path).read_bytes()).hexdigest(),
        }

    return {
        "tool": "memprof-collect",
        "backend": backend,
        "precision": config.precision,
        "metric": config.metric.value,
        "seed": config.seed,
        "checkpoints": [{"id": c.id, "step": c.step} for c in config.checkpoints],
        "samples": {
            "training": sum(1 for s in samples if s.group is not None),
            "validation": sum(1 for s in samples if s.group is None),
        },
        "datasets": {
            "train": dataset_entry(train_path),
            "validation": dataset_entry(valid_path),
        },
        "config": config.to_json_dict(),
        "panel_sha256": panel_sha256,
    }


def write_manifest(manifest: dict, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
