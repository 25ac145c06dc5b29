"""Deterministic interpolated-bigram oracle backend.

Built from the condition text alone, it gives every algorithm in the repo
an offline, hand-checkable probability model: P(w | prev) =
lambda * P_bigram(w | prev) + (1 - lambda) * P_unigram(w), both additively
smoothed over a closed vocabulary (condition tokens + target tokens + UNK).
Never used for reported metric results, only for tests and examples.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ArgumentError
from .scorer import (
    PromptSet,
    ScoredSequence,
    ScorerBackend,
    Token,
    average_prompted,
)

UNK = "<unk>"

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

DEFAULT_BETA = 0.1
DEFAULT_LAMBDA = 0.3


def word_tokenize(text: str) -> list[str]:
    """Whitespace tokenization with punctuation split off."""
    return _WORD_RE.findall(text)


@dataclass(frozen=True)
class OracleModel:
    """Closed-vocabulary smoothed unigram/bigram mixture over a condition."""

    vocab: frozenset[str]
    counts: dict[str, int]
    bigram_counts: dict[tuple[str, str], int]
    first_counts: dict[str, int]
    total: int
    beta: float
    lam: float

    @classmethod
    def build(
        cls,
        condition: str,
        extra_tokens: Sequence[str] = (),
        beta: float = DEFAULT_BETA,
        lam: float = DEFAULT_LAMBDA,
    ) -> "OracleModel":
        if beta <= 0:
            raise ArgumentError("beta must be > 0")
        if not 0.0 <= lam <= 1.0:
            raise ArgumentError("lambda must lie in [0, 1]")
        cond = word_tokenize(condition)
        vocab = frozenset(cond) | frozenset(extra_tokens) | {UNK}
        counts: dict[str, int] = {}
        for w in cond:
            counts[w] = counts.get(w, 0) + 1
        bigrams: dict[tuple[str, str], int] = {}
        firsts: dict[str, int] = {}
        for a, b in zip(cond, cond[1:]):
            bigrams[(a, b)] = bigrams.get((a, b), 0) + 1
            firsts[a] = firsts.get(a, 0) + 1
        return cls(vocab, counts, bigrams, firsts, len(cond), beta, lam)

    def _canon(self, surface: str) -> str:
        return surface if surface in self.vocab else UNK

    def _p_unigram(self, surface: str) -> float:
        w = self._canon(surface)
        denom = self.total + self.beta * len(self.vocab)
        return (self.counts.get(w, 0) + self.beta) / denom

    def _p_bigram(self, prev: str, surface: str) -> float:
        p = self._canon(prev)
        w = self._canon(surface)
        denom = self.first_counts.get(p, 0) + self.beta * len(self.vocab)
        return (self.bigram_counts.get((p, w), 0) + self.beta) / denom

    def prob(self, prev_surface: Optional[str], surface: str) -> float:
        uni = self._p_unigram(surface)
        if prev_surface is None:
            return uni
        return self.lam * self._p_bigram(prev_surface, surface) + (1.0 - self.lam) * uni

    def logprob(self, prev_surface: Optional[str], surface: str) -> float:
        return math.log(self.prob(prev_surface, surface))

    def topk(self, prev_surface: Optional[str], k: int) -> list[tuple[str, float]]:
        """k most probable vocab entries, descending, ties lexicographic."""
        if k < 1:
            raise ArgumentError("k must be >= 1")
        ranked = sorted(
            ((w, self.prob(prev_surface, w)) for w in self.vocab),
            key=lambda item: (-item[1], item[0]),
        )
        return [(w, math.log(p)) for w, p in ranked[:k]]


def oracle_logprob(model: OracleModel, prev_token: Optional[Token], token: Token) -> float:
    return model.logprob(prev_token.surface if prev_token else None, token.surface)


def oracle_topk(model: OracleModel, prev_token: Optional[Token], k: int) -> list[tuple[Token, float]]:
    return [
        (Token.of(w), lp)
        for w, lp in model.topk(prev_token.surface if prev_token else None, k)
    ]


class NgramBackend(ScorerBackend):
    """ScorerBackend over the bigram oracle. Immutable, concurrency-safe."""

    concurrency_safe = True
    supports_topk = True

    def __init__(self, beta: float = DEFAULT_BETA, lam: float = DEFAULT_LAMBDA):
        super().__init__()
        self.beta = beta
        self.lam = lam

    @property
    def model_id(self) -> str:
        return f"ngram-oracle(beta={self.beta},lambda={self.lam})"

    def tokenize(self, text: str) -> list[Token]:
        return [Token.of(w) for w in word_tokenize(text)]

    def detokenize(self, tokens: Sequence[Token]) -> str:
        return " ".join(t.surface for t in tokens)

    def _score_one(self, condition: str, target: str, prompts: PromptSet) -> ScoredSequence:
        # A singleton prompt set carries at most one suffix or one prefix.
        cond = condition
        if prompts.encoder_suffixes:
            cond = f"{condition} {prompts.encoder_suffixes[0]}"
        prefix = word_tokenize(prompts.decoder_prefixes[0]) if prompts.decoder_prefixes else []
        target_words = word_tokenize(target)
        if not target_words:
            raise ArgumentError("target contains no tokens")
        model = OracleModel.build(
            cond, extra_tokens=prefix + target_words, beta=self.beta, lam=self.lam
        )
        context = prefix[-1] if prefix else None
        logprobs = []
        for w in target_words:
            logprobs.append(model.logprob(context, w))
            context = w
        return ScoredSequence.from_pairs([Token.of(w) for w in target_words], logprobs)

    def _score(self, condition: str, target: str, prompts: PromptSet) -> ScoredSequence:
        return average_prompted(lambda p: self._score_one(condition, target, p), prompts)

    def _topk(self, condition: str, prefix_tokens: Sequence[Token], k: int) -> list[tuple[Token, float]]:
        surfaces = [t.surface for t in prefix_tokens]
        model = OracleModel.build(condition, extra_tokens=surfaces, beta=self.beta, lam=self.lam)
        prev = surfaces[-1] if surfaces else None
        return [(Token.of(w), lp) for w, lp in model.topk(prev, k)]
