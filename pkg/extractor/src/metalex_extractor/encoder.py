"""Encoder inference: hidden-state pooling and subtoken alignment.

Vectors are the mean of the last four hidden-state layers. A word that
the tokenizer splits into several subtokens is represented by its first
subtoken's vector; the sentence is represented by position 0. Words the
tokenizer erases (normalization can delete them outright) or that fall
beyond the encoder's length limit cannot be represented and are reported
instead.

torch and transformers are imported lazily so the toy path works without
them installed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SentenceEncoding:
    features: np.ndarray  # (true_length, hidden) float32, pooled
    word_ids: tuple      # per position: source word index or None


class Encoder:
    def __init__(self, identifier: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ConfigError(f"encoder mode needs torch and transformers: {exc}")
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(identifier)
            self.model = AutoModel.from_pretrained(identifier)
        except OSError as exc:
            raise ConfigError(f"cannot load encoder {identifier!r}: {exc}")
        self.model.to(device)
        self.model.eval()
        self.device = device
        self.hidden_size = int(self.model.config.hidden_size)
        limit = getattr(self.model.config, "max_position_embeddings", None)
        tok_limit = getattr(self.tokenizer, "model_max_length", None)
        candidates = [c for c in (limit, tok_limit)
                      if isinstance(c, int) and 0 < c < 1_000_000]
        if not candidates:
            raise ConfigError(f"encoder {identifier!r} reports no usable length limit")
        self.max_length = min(candidates)

    def encode(self, sentences: list[list[str]], batch_size: int):
        """Pooled features and word alignment for pre-split sentences."""
        torch = self._torch
        out: list[SentenceEncoding] = []
        for start in range(0, len(sentences), batch_size):
            batch = sentences[start:start + batch_size]
            enc = self.tokenizer(
                batch, is_split_into_words=True, padding=True,
                truncation=True, max_length=self.max_length,
                return_tensors="pt")
            with torch.no_grad():
                states = self.model(
                    **{k: v.to(self.device) for k, v in enc.items()},
                    output_hidden_states=True).hidden_states
            pooled = torch.stack(states[-4:]).mean(dim=0).cpu().numpy()
            lengths = enc["attention_mask"].sum(dim=1).tolist()
            for i, length in enumerate(lengths):
                word_ids = tuple(enc.word_ids(i)[:length])
                out.append(SentenceEncoding(
                    features=pooled[i, :length].astype(np.float32),
                    word_ids=word_ids))
        return out


def first_subtoken(word_ids, target: int):
    """Position of the target word's first subtoken, or (None, reason)."""
    for pos, wid in enumerate(word_ids):
        if wid == target:
            return pos, None
    present = [w for w in word_ids if w is not None]
    if present and max(present) < target:
        return None, "sentence truncated before the target token"
    return None, "target word does not align with the encoder tokenization"
