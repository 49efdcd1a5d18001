"""Two-step instance sampling over macro-batches.

For each macro-batch, draw ``batches_per_macrobatch`` distinct batches
uniformly from its batch range, then ``instances_per_batch`` distinct
slots uniformly within each chosen batch; validation rows are drawn
uniformly without replacement from the validation dataset. All draws
come from one Philox stream keyed by the config seed, iterated in
macro-batch order, so the sample is a pure function of the config.
Chosen batches and slots are sorted, which makes instance ids
monotone in dataset offset within each macro-batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .config import CollectorConfig, CollectorError

#: Group label for validation instances in PanelFile CSV.
NEVER_LABEL = "inf"


@dataclass(frozen=True)
class SampledInstance:
    """One scored instance: its panel id, macro-batch (or validation), and
    row offset into the corresponding dataset."""

    instance_id: str
    group: int | None  # None = validation (never trained)
    offset: int        # row in the train dataset (group set) or valid dataset

    @property
    def group_label(self) -> str:
        return NEVER_LABEL if self.group is None else str(self.group)


def sample_instances(config: CollectorConfig, train_rows: int, valid_rows: int) -> list[SampledInstance]:
    """Draw the panel sample for this configuration.

    ``train_rows`` and ``valid_rows`` are the row counts of the training
    and validation datasets; the training dataset must cover every batch
    up to the last treatment step. Macro-batches shorter than
    ``batches_per_macrobatch`` raise rather than silently truncating.
    """
    rng = Generator(Philox(key=config.seed))
    batch = config.batch_size_sequences

    needed = config.treatment_grid[-1] * batch
    if train_rows < needed:
        raise CollectorError(
            f"training dataset has {train_rows} rows but the last treatment step "
            f"{config.treatment_grid[-1]} needs {needed}"
        )
    if valid_rows < config.n_validation:
        raise CollectorError(
            f"validation dataset has {valid_rows} rows; need {config.n_validation}"
        )

    width = len(str(config.treatment_grid[-1] * batch - 1))
    samples: list[SampledInstance] = []
    for g, first, last in config.macro_batch_ranges():
        available = last - first + 1
        if available < config.batches_per_macrobatch:
            raise CollectorError(
                f"macro-batch at step {g} spans {available} batches; "
                f"need {config.batches_per_macrobatch}"
            )
        batches = np.sort(rng.choice(np.arange(first, last + 1),
                                     size=config.batches_per_macrobatch, replace=False))
        for b in batches:
            slots = np.sort(rng.choice(batch, size=config.instances_per_batch, replace=False))
            for s in slots:
                offset = int((b - 1) * batch + s)
                samples.append(SampledInstance(
                    instance_id=f"t{offset:0{width}d}", group=int(g), offset=offset,
                ))

    vwidth = len(str(valid_rows - 1))
    rows = np.sort(rng.choice(valid_rows, size=config.n_validation, replace=False))
    samples.extend(
        SampledInstance(instance_id=f"v{int(r):0{vwidth}d}", group=None, offset=int(r))
        for r in rows
    )
    return samples
