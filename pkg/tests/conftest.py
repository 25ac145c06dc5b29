import random

import pytest

from errlens import NgramBackend, PromptSet, ScoredSequence, ScorerBackend, Token
from errlens.ngram import word_tokenize


@pytest.fixture
def oracle():
    return NgramBackend()


class CountingBackend(ScorerBackend):
    """Delegating backend that counts score/topk calls."""

    concurrency_safe = True

    def __init__(self, inner):
        super().__init__()
        self.inner = inner
        self.score_calls = 0
        self.topk_calls = 0

    @property
    def model_id(self):
        return f"counting({self.inner.model_id})"

    def tokenize(self, text):
        return self.inner.tokenize(text)

    def detokenize(self, tokens):
        return self.inner.detokenize(tokens)

    def _score(self, condition, target, prompts):
        self.score_calls += 1
        return self.inner.score(condition, target, prompts)

    def _topk(self, condition, prefix_tokens, k):
        self.topk_calls += 1
        return self.inner.topk(condition, prefix_tokens, k)


class ReplayBackend(ScorerBackend):
    """Serves recorded per-token logprobs; unknown sentences score poorly.

    Sentences are keyed by their detokenized form (space-joined words).
    """

    concurrency_safe = True
    UNKNOWN_LOGPROB = -20.0

    def __init__(self, recorded, topk_candidates):
        super().__init__()
        self.recorded = dict(recorded)
        self.topk_candidates = list(topk_candidates)

    @property
    def model_id(self):
        return "replay"

    def tokenize(self, text):
        return [Token.of(w) for w in word_tokenize(text)]

    def detokenize(self, tokens):
        return " ".join(t.surface for t in tokens)

    def _score(self, condition, target, prompts):
        words = word_tokenize(target)
        key = " ".join(words)
        logprobs = self.recorded.get(key, [self.UNKNOWN_LOGPROB] * len(words))
        return ScoredSequence.from_pairs([Token.of(w) for w in words], logprobs)

    def _topk(self, condition, prefix_tokens, k):
        return [(Token.of(w), lp) for w, lp in self.topk_candidates[:k]]


@pytest.fixture
def counting_oracle():
    return CountingBackend(NgramBackend())


def random_reference(rng: random.Random, min_len=5, max_len=15) -> str:
    # Distinct-ish word pool keeps the oracle's optimum near the reference.
    pool = [f"w{i}" for i in range(40)]
    n = rng.randint(min_len, max_len)
    return " ".join(rng.sample(pool, n))
