"""Per-sequence performance metrics from next-token logits.

A scorer exposes ``token_logits(tokens) -> (len(tokens) - 1, vocab)``:
row ``i`` is the model's distribution over position ``i + 1`` given the
true tokens up to and including position ``i``. Metrics reduce that
matrix to one number per sequence:

* ``LOGLIK``: sum of the true tokens' log-probabilities, in nats
  (non-positive for any proper probability model);
* ``TOKEN_ACC``: fraction of positions where the argmax equals the true
  token, in [0, 1];
* ``TOKEN_RANK``: mean rank of the true token, where rank is 1 plus the
  number of tokens with strictly larger logit (ties share the best
  rank), at least 1.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .config import CollectorError, Metric


class SequenceScorer(Protocol):
    vocab_size: int

    def token_logits(self, tokens: np.ndarray) -> np.ndarray:
        """Next-token logits, shape ``(len(tokens) - 1, vocab_size)``."""
        ...


def metric_from_logits(logits: np.ndarray, targets: np.ndarray, metric: Metric) -> float:
    """Reduce one sequence's next-token logits to the requested metric."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    if logits.ndim != 2 or len(logits) != len(targets):
        raise CollectorError(
            f"logits shape {logits.shape} does not match {len(targets)} target tokens"
        )
    rows = np.arange(len(targets))
    true_logit = logits[rows, targets]

    if metric is Metric.LOGLIK:
        # stable log-softmax at the true token
        m = logits.max(axis=1)
        logsumexp = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
        return float(np.sum(true_logit - logsumexp))
    if metric is Metric.TOKEN_ACC:
        return float(np.mean(logits.argmax(axis=1) == targets))
    if metric is Metric.TOKEN_RANK:
        rank = 1 + (logits > true_logit[:, None]).sum(axis=1)
        return float(np.mean(rank))
    raise CollectorError(f"unknown metric {metric!r}")


def score_sequence(scorer: SequenceScorer, tokens: np.ndarray, metric: Metric) -> float:
    tokens = np.asarray(tokens)
    logits = scorer.token_logits(tokens)
    return metric_from_logits(logits, tokens[1:], metric)


class PerfectScorer:
    """Puts all mass on the true next token; accuracy 1, rank 1."""

    def __init__(self, vocab_size: int, margin: float = 50.0):
        self.vocab_size = vocab_size
        self.margin = margin

    def token_logits(self, tokens: np.ndarray) -> np.ndarray:
        logits = np.zeros((len(tokens) - 1, self.vocab_size))
        logits[np.arange(len(tokens) - 1), tokens[1:]] = self.margin
        return logits


class UniformScorer:
    """Equal logit on every token: the maximally uninformative model."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def token_logits(self, tokens: np.ndarray) -> np.ndarray:
        return np.zeros((len(tokens) - 1, self.vocab_size))


class TabularScorer:
    """Hand-specified per-position probability rows, for toy oracles."""

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.float64)
        self.vocab_size = rows.shape[1]
        self._log_rows = np.log(rows)

    def token_logits(self, tokens: np.ndarray) -> np.ndarray:
        if len(tokens) - 1 != len(self._log_rows):
            raise CollectorError("tabular scorer length mismatch")
        return self._log_rows
