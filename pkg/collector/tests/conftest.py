from __future__ import annotations

import numpy as np
import pytest

from memprof_collector.config import CheckpointRef, CollectorConfig, Metric


def tiny_config(**overrides):
    base = dict(
        checkpoints=(CheckpointRef("ck0", 0), CheckpointRef("ck2", 2)),
        treatment_grid=(1, 2),
        batches_per_macrobatch=1,
        instances_per_batch=4,
        n_validation=6,
        metric=Metric.LOGLIK,
        sequence_length=16,
        batch_size_sequences=8,
        seed=11,
    )
    base.update(overrides)
    return CollectorConfig(**base)


@pytest.fixture
def toy_datasets(tmp_path):
    """Small pre-tokenized train/valid arrays on disk."""
    rng = np.random.default_rng(3)
    vocab = 97
    train = rng.integers(0, vocab, size=(16, 16), dtype=np.uint16)
    valid = rng.integers(0, vocab, size=(12, 16), dtype=np.uint16)
    train_path = tmp_path / "train.npy"
    valid_path = tmp_path / "valid.npy"
    np.save(train_path, train)
    np.save(valid_path, valid)
    return train_path, valid_path, vocab
