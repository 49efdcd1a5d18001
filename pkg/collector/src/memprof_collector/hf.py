"""transformers backend: next-token logits from a causal LM checkpoint.

Imports torch and transformers lazily so the rest of the collector (and
its stub-backed tests) work without them. Models are evaluated without
gradients; reduced precision ("bfloat16"/"float16") is supported for
models that need it and is recorded in the run manifest because it
perturbs outcomes.
"""

from __future__ import annotations

import numpy as np

from .config import CollectorError


class TransformersScorer:
    """Scores sequences with a local causal-LM checkpoint directory."""

    def __init__(self, model_path: str, precision: str = "float32", device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForCausalLM
        except ImportError as exc:
            raise CollectorError(f"hf backend unavailable: {exc}") from exc

        self._torch = torch
        dtype = {"float32": torch.float32, "bfloat16": torch.bfloat16,
                 "float16": torch.float16}[precision]
        try:
            self.model = AutoModelForCausalLM.from_pretrained(model_path, dtype=dtype)
        except Exception as exc:
            raise CollectorError(f"checkpoint load failure for {model_path!r}: {exc}") from exc
        self.model.eval()
        self.model.to(device)
        self.device = device
        self.vocab_size = int(self.model.config.vocab_size)

    def token_logits(self, tokens: np.ndarray) -> np.ndarray:
        torch = self._torch
        ids = torch.as_tensor(np.asarray(tokens, dtype=np.int64), device=self.device)
        with torch.no_grad():
            # predictions for positions 1..L-1 come from the first L-1 inputs
            out = self.model(input_ids=ids[None, :-1]).logits[0]
        return out.float().cpu().numpy()
