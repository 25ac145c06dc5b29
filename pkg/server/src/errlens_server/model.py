"""Seq2seq scoring engine.

Wraps an encoder-decoder language model and exposes the three
operations the wire protocol needs: per-token target logprobs
(optionally prompt-averaged), batched scoring, and top-k next-token
candidates after a forced decoder prefix.

Prompt handling: each encoder suffix is appended to the condition text
and each decoder prefix is force-decoded before the target; prompt
tokens are scored through but excluded from the returned logprob array,
and per-token logprobs are averaged arithmetically across the
individual prompt variants.
"""

from __future__ import annotations

import threading
from typing import Optional, Sequence

import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer


class InvalidRequestError(ValueError):
    """Request content the schema cannot rule out but the model rejects."""


class Seq2SeqScorer:
    """Deterministic (no sampling) scorer; inference is serialized per instance."""

    def __init__(self, model, tokenizer, model_id: str, device: str = "cpu"):
        self.model = model.to(device)
        self.model.eval()
        self.tokenizer = tokenizer
        self.model_id = model_id
        self.device = device
        self._lock = threading.Lock()

    @classmethod
    def from_pretrained(cls, model_id: str, device: str = "cpu") -> "Seq2SeqScorer":
        model = AutoModelForSeq2SeqLM.from_pretrained(model_id)
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        return cls(model, tokenizer, model_id, device)

    # -- tokenization helpers ------------------------------------------------

    def _ids(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _token_strings(self, ids: Sequence[int]) -> list[str]:
        # One decode per id keeps each token's own leading whitespace, so
        # concatenating the returned strings reproduces the target text.
        return [
            self.tokenizer.decode([i], clean_up_tokenization_spaces=False)
            for i in ids
        ]

    @property
    def _decoder_start(self) -> int:
        start = self.model.config.decoder_start_token_id
        if start is None:
            start = self.model.config.bos_token_id
        return start

    # -- scoring ---------------------------------------------------------------

    def _target_logprobs(
        self, condition: str, target_ids: list[int], prefix_ids: list[int]
    ) -> torch.Tensor:
        """Logprobs of target_ids force-decoded after prefix_ids."""
        encoded = self.tokenizer(condition, return_tensors="pt", truncation=True)
        labels = prefix_ids + target_ids + [self.tokenizer.eos_token_id]
        decoder_input = torch.tensor([[self._decoder_start] + labels[:-1]])
        with torch.no_grad():
            logits = self.model(
                input_ids=encoded["input_ids"].to(self.device),
                attention_mask=encoded["attention_mask"].to(self.device),
                decoder_input_ids=decoder_input.to(self.device),
            ).logits[0]
        logprobs = torch.log_softmax(logits, dim=-1)
        picked = logprobs[range(len(labels)), labels]
        return picked[len(prefix_ids) : len(prefix_ids) + len(target_ids)]

    def score(
        self,
        condition: str,
        target: str,
        encoder_suffixes: Sequence[str] = (),
        decoder_prefixes: Sequence[str] = (),
    ) -> tuple[list[str], list[float]]:
        target_ids = self._ids(target)
        if not target_ids:
            raise InvalidRequestError("target tokenizes to nothing")
        variants: list[tuple[str, list[int]]] = []
        for suffix in encoder_suffixes:
            variants.append((condition + suffix, []))
        for prefix in decoder_prefixes:
            variants.append((condition, self._ids(prefix)))
        if not variants:
            variants.append((condition, []))
        with self._lock:
            per_variant = [
                self._target_logprobs(cond, target_ids, prefix_ids)
                for cond, prefix_ids in variants
            ]
        averaged = torch.stack(per_variant).mean(dim=0)
        return self._token_strings(target_ids), [float(v) for v in averaged]

    def score_batch(
        self, items: Sequence[tuple[str, str, Sequence[str], Sequence[str]]]
    ) -> list[tuple[list[str], list[float]]]:
        return [self.score(*item) for item in items]

    def topk(
        self, condition: str, prefix_tokens: Sequence[str], k: int
    ) -> list[tuple[str, float]]:
        """k most probable non-special next tokens, sorted descending."""
        if k < 1:
            raise InvalidRequestError("k must be >= 1")
        encoded = self.tokenizer(condition, return_tensors="pt", truncation=True)
        prefix_ids = self._ids("".join(prefix_tokens))
        decoder_input = torch.tensor([[self._decoder_start] + prefix_ids])
        with self._lock, torch.no_grad():
            logits = self.model(
                input_ids=encoded["input_ids"].to(self.device),
                attention_mask=encoded["attention_mask"].to(self.device),
                decoder_input_ids=decoder_input.to(self.device),
            ).logits[0, -1]
        logprobs = torch.log_softmax(logits, dim=-1)
        for special_id in self.tokenizer.all_special_ids:
            logprobs[special_id] = float("-inf")
        k = min(k, int((logprobs > float("-inf")).sum()))
        values, indices = torch.topk(logprobs, k)
        return [
            (self.tokenizer.decode([int(i)], clean_up_tokenization_spaces=False), float(v))
            for v, i in zip(values, indices)
        ]
