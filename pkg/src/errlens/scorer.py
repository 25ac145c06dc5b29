"""Conditional-scorer abstraction: backends, scored sequences, variants.

A backend turns (condition, target) into per-token conditional
log-probabilities (natural log). Everything downstream — refinement,
distances, meta-evaluation — only sees this interface.
"""

from __future__ import annotations

import math
import threading
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from .errors import ArgumentError

MEAN_TOL = 1e-9


def surface_id(surface: str) -> int:
    """Stable integer id for backends without a native token id space."""
    return zlib.crc32(surface.encode("utf-8"))


@dataclass(frozen=True)
class Token:
    surface: str
    id: int

    def __post_init__(self):
        if not self.surface:
            raise ArgumentError("token surface must be non-empty")

    @classmethod
    def of(cls, surface: str) -> "Token":
        return cls(surface, surface_id(surface))


@dataclass(frozen=True)
class ScoredSequence:
    """A tokenized target with per-token conditional log-probabilities."""

    tokens: tuple[Token, ...]
    logprobs: tuple[float, ...]
    mean: float

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs) or not self.tokens:
            raise ArgumentError(
                "tokens and logprobs must be equal-length and non-empty"
            )
        expected = math.fsum(self.logprobs) / len(self.logprobs)
        if abs(self.mean - expected) > MEAN_TOL:
            raise ArgumentError(
                f"mean {self.mean} inconsistent with logprobs (expected {expected})"
            )

    @classmethod
    def from_pairs(cls, tokens: Sequence[Token], logprobs: Sequence[float]) -> "ScoredSequence":
        logprobs = tuple(float(x) for x in logprobs)
        if not logprobs:
            raise ArgumentError("cannot score an empty target")
        return cls(tuple(tokens), logprobs, math.fsum(logprobs) / len(logprobs))


class Direction(Enum):
    REF_TO_HYP = "r->h"
    HYP_TO_REF = "h->r"
    SRC_TO_HYP = "s->h"


class Variant(Enum):
    PRECISION = "precision"
    RECALL = "recall"
    F = "f"
    FAITHFULNESS = "faithfulness"


@dataclass(frozen=True)
class PromptSet:
    """Encoder-suffix and decoder-prefix prompt phrases; empty = unprompted."""

    encoder_suffixes: tuple[str, ...] = ()
    decoder_prefixes: tuple[str, ...] = ()

    @classmethod
    def empty(cls) -> "PromptSet":
        return cls()

    def is_empty(self) -> bool:
        return not self.encoder_suffixes and not self.decoder_prefixes

    def singletons(self) -> Iterator["PromptSet"]:
        """Individual prompts whose per-token scores get averaged.

        Each encoder suffix and each decoder prefix counts as one prompt;
        an empty set yields the unprompted singleton itself.
        """
        if self.is_empty():
            yield self
            return
        for suffix in self.encoder_suffixes:
            yield PromptSet(encoder_suffixes=(suffix,))
        for prefix in self.decoder_prefixes:
            yield PromptSet(decoder_prefixes=(prefix,))


class ScorerBackend(ABC):
    """Deterministic per-token conditional scorer.

    Scoring the same (condition, target, prompts) twice must return
    identical results. Backends that are not safe for concurrent calls
    set ``concurrency_safe = False`` and are serialized by the library.
    """

    concurrency_safe: bool = True
    supports_topk: bool = True

    def __init__(self):
        self._lock = threading.Lock() if not self.concurrency_safe else None

    @property
    @abstractmethod
    def model_id(self) -> str:
        ...

    @abstractmethod
    def tokenize(self, text: str) -> list[Token]:
        ...

    @abstractmethod
    def detokenize(self, tokens: Sequence[Token]) -> str:
        ...

    @abstractmethod
    def _score(self, condition: str, target: str, prompts: PromptSet) -> ScoredSequence:
        ...

    @abstractmethod
    def _topk(self, condition: str, prefix_tokens: Sequence[Token], k: int) -> list[tuple[Token, float]]:
        ...

    def score(self, condition: str, target: str, prompts: PromptSet = PromptSet.empty()) -> ScoredSequence:
        if not target:
            raise ArgumentError("target must be non-empty")
        if self._lock is not None:
            with self._lock:
                return self._score(condition, target, prompts)
        return self._score(condition, target, prompts)

    def topk(self, condition: str, prefix_tokens: Sequence[Token], k: int) -> list[tuple[Token, float]]:
        if k < 1:
            raise ArgumentError("k must be >= 1")
        if self._lock is not None:
            with self._lock:
                return self._topk(condition, prefix_tokens, k)
        return self._topk(condition, prefix_tokens, k)


def average_prompted(score_one, prompts: PromptSet) -> ScoredSequence:
    """Average per-token logprobs over every individual prompt.

    ``score_one(prompt_set)`` must return a ScoredSequence with a stable
    target tokenization across prompts (encoder suffixes do not touch the
    target; decoder prefixes are excluded from the returned logprobs).
    """
    sequences = [score_one(p) for p in prompts.singletons()]
    first = sequences[0]
    if len(sequences) == 1:
        return first
    for seq in sequences[1:]:
        if tuple(t.surface for t in seq.tokens) != tuple(t.surface for t in first.tokens):
            raise ArgumentError("prompt variants produced misaligned tokenizations")
    averaged = [
        math.fsum(seq.logprobs[i] for seq in sequences) / len(sequences)
        for i in range(len(first.tokens))
    ]
    return ScoredSequence.from_pairs(first.tokens, averaged)


def score_tokens(
    backend: ScorerBackend,
    condition: str,
    target: str,
    prompts: PromptSet = PromptSet.empty(),
) -> ScoredSequence:
    """Token-aligned log-probabilities of target conditioned on condition."""
    if not target:
        raise ArgumentError("target must be non-empty")
    return backend.score(condition, target, prompts)


def vanilla_score(seq: ScoredSequence) -> float:
    """Mean token log-probability — the sentence-level quality score."""
    return seq.mean


def _directional(
    backend: ScorerBackend,
    condition: str,
    target: str,
    prompts: PromptSet,
) -> float:
    return vanilla_score(score_tokens(backend, condition, target, prompts))


def variant_score(
    backend: ScorerBackend,
    source: Optional[str],
    references: Sequence[str],
    hypothesis: str,
    variant: Variant,
    prompts: PromptSet = PromptSet.empty(),
) -> float:
    """Sentence score under a directional variant.

    PRECISION = r->h, RECALL = h->r, F = (r->h + h->r) / 2,
    FAITHFULNESS = s->h. With multiple references the hypothesis score is
    the maximum over per-reference scores.
    """
    if not hypothesis:
        raise ArgumentError("hypothesis must be non-empty")
    if variant is Variant.FAITHFULNESS:
        if not source:
            raise ArgumentError("faithfulness variant requires a source")
        return _directional(backend, source, hypothesis, prompts)
    if not references:
        raise ArgumentError(f"{variant.value} variant requires at least one reference")

    def per_reference(ref: str) -> float:
        if variant is Variant.PRECISION:
            return _directional(backend, ref, hypothesis, prompts)
        if variant is Variant.RECALL:
            return _directional(backend, hypothesis, ref, prompts)
        forward = _directional(backend, ref, hypothesis, prompts)
        backward = _directional(backend, hypothesis, ref, prompts)
        return (forward + backward) / 2.0

    return max(per_reference(r) for r in references)
