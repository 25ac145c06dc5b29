"""Iterative detect-correct refinement of a hypothesis.

The loop: score the current hypothesis token-by-token, pick the token
with the lowest generation probability, propose insert/delete/substitute
edits from the backend's top-k candidates at that position, keep the edit
that maximizes the sentence score, and stop early when nothing improves.
Hypotheses failing the non-translation screen are returned untouched.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

from .config import EvalConfig
from .errors import ArgumentError, BackendError
from .scorer import (
    PromptSet,
    ScoredSequence,
    ScorerBackend,
    Token,
    Variant,
    score_tokens,
    vanilla_score,
)


def _token_to_dict(token: Token) -> dict:
    return {"surface": token.surface, "id": token.id}


def _token_from_dict(data: dict) -> Token:
    return Token(data["surface"], data["id"])


class EditOp(Enum):
    INSERT_BEFORE = "insert_before"
    DELETE = "delete"
    SUBSTITUTE = "substitute"


class StopReason(Enum):
    MAX_ITERATIONS = "max_iterations"
    EARLY_STOP = "early_stop"
    NON_TRANSLATION_SKIPPED = "non_translation_skipped"


@dataclass(frozen=True)
class Edit:
    position: int
    op: EditOp
    candidate: Optional[Token] = None

    def __post_init__(self):
        needs_candidate = self.op is not EditOp.DELETE
        if needs_candidate != (self.candidate is not None):
            raise ArgumentError(f"{self.op.value} edit candidate mismatch")

    def apply(self, tokens: Sequence[Token]) -> list[Token]:
        if not 0 <= self.position < len(tokens):
            raise ArgumentError(f"edit position {self.position} out of range")
        out = list(tokens)
        if self.op is EditOp.DELETE:
            if len(out) == 1:
                raise ArgumentError("cannot delete the only token")
            del out[self.position]
        elif self.op is EditOp.SUBSTITUTE:
            out[self.position] = self.candidate
        else:
            out.insert(self.position, self.candidate)
        return out

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "op": self.op.value,
            "candidate": _token_to_dict(self.candidate) if self.candidate else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Edit":
        cand = data.get("candidate")
        return cls(
            position=data["position"],
            op=EditOp(data["op"]),
            candidate=_token_from_dict(cand) if cand else None,
        )


@dataclass(frozen=True)
class NonTranslationVerdict:
    flagged: bool
    overlap_ratio: float
    low_prob_fraction: float


@dataclass(frozen=True)
class RefinementIteration:
    detected_index: int
    detected_token: Token
    candidates: tuple[tuple[Token, float], ...]
    chosen_edit: Optional[Edit]
    score_before: float
    score_after: float

    def __post_init__(self):
        if (self.chosen_edit is not None) != (self.score_after > self.score_before):
            raise ArgumentError("chosen_edit must be present iff the score improved")

    def to_dict(self) -> dict:
        return {
            "detected_index": self.detected_index,
            "detected_token": _token_to_dict(self.detected_token),
            "candidates": [
                {**_token_to_dict(t), "logprob": lp} for t, lp in self.candidates
            ],
            "chosen_edit": self.chosen_edit.to_dict() if self.chosen_edit else None,
            "score_before": self.score_before,
            "score_after": self.score_after,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RefinementIteration":
        chosen = data.get("chosen_edit")
        return cls(
            detected_index=data["detected_index"],
            detected_token=_token_from_dict(data["detected_token"]),
            candidates=tuple(
                (_token_from_dict(c), c["logprob"]) for c in data["candidates"]
            ),
            chosen_edit=Edit.from_dict(chosen) if chosen else None,
            score_before=data["score_before"],
            score_after=data["score_after"],
        )


@dataclass(frozen=True)
class RefinementTrace:
    iterations: tuple[RefinementIteration, ...]
    final_text: str
    stop_reason: StopReason
    verdict: Optional[NonTranslationVerdict] = None

    @property
    def accepted(self) -> tuple[RefinementIteration, ...]:
        return tuple(it for it in self.iterations if it.chosen_edit is not None)

    def to_dict(self) -> dict:
        return {
            "iterations": [it.to_dict() for it in self.iterations],
            "final_text": self.final_text,
            "stop_reason": self.stop_reason.value,
            "non_translation": {
                "flagged": self.verdict.flagged,
                "overlap_ratio": self.verdict.overlap_ratio,
                "low_prob_fraction": self.verdict.low_prob_fraction,
            }
            if self.verdict
            else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RefinementTrace":
        nt = data.get("non_translation")
        return cls(
            iterations=tuple(
                RefinementIteration.from_dict(it) for it in data["iterations"]
            ),
            final_text=data["final_text"],
            stop_reason=StopReason(data["stop_reason"]),
            verdict=NonTranslationVerdict(
                nt["flagged"], nt["overlap_ratio"], nt["low_prob_fraction"]
            )
            if nt
            else None,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def non_translation_test(
    hyp_tokens: Sequence[Token],
    ref_tokens: Sequence[Token],
    scored: ScoredSequence,
    cfg: EvalConfig,
) -> NonTranslationVerdict:
    """Screen for hopeless hypotheses before spending refinement calls.

    Low token overlap with the reference is the trigger; a high fraction
    of below-average token probabilities double-checks it. Both must fire.
    """
    if not hyp_tokens or not ref_tokens:
        raise ArgumentError("non_translation_test requires non-empty token lists")
    hyp_counts = Counter(t.surface for t in hyp_tokens)
    ref_counts = Counter(t.surface for t in ref_tokens)
    shared = sum((hyp_counts & ref_counts).values())
    overlap_ratio = shared / len(hyp_tokens)
    mean = vanilla_score(scored)
    low = sum(1 for lp in scored.logprobs if lp < mean)
    low_prob_fraction = low / len(scored.logprobs)
    flagged = overlap_ratio < cfg.overlap_threshold and low_prob_fraction > cfg.low_prob_threshold
    return NonTranslationVerdict(flagged, overlap_ratio, low_prob_fraction)


def detect(scored: ScoredSequence) -> int:
    """Index of the token with the lowest logprob; ties pick the earliest."""
    best_idx = 0
    best = scored.logprobs[0]
    for i, lp in enumerate(scored.logprobs):
        if lp < best:
            best, best_idx = lp, i
    return best_idx


def propose_edits(
    hyp_tokens: Sequence[Token],
    position: int,
    candidates: Sequence[tuple[Token, float]],
) -> list[Edit]:
    """Delete, substitute, and insert-before edits at the detected position."""
    if not 0 <= position < len(hyp_tokens):
        raise ArgumentError(f"position {position} out of range")
    edits: list[Edit] = []
    if len(hyp_tokens) > 1:
        edits.append(Edit(position, EditOp.DELETE))
    current = hyp_tokens[position].surface
    for cand, _ in candidates:
        if cand.surface != current:
            edits.append(Edit(position, EditOp.SUBSTITUTE, cand))
    for cand, _ in candidates:
        edits.append(Edit(position, EditOp.INSERT_BEFORE, cand))
    return edits


def select_best(
    backend: ScorerBackend,
    condition: str,
    hyp_tokens: Sequence[Token],
    edits: Sequence[Edit],
    prompts: PromptSet = PromptSet.empty(),
    score_fn: Optional[Callable[[str], float]] = None,
) -> tuple[Edit, float]:
    """Best edit by sentence score; ties keep the earliest edit.

    ``score_fn`` overrides the default r->h vanilla score so refinement
    can optimize a composite variant (e.g. F).
    """
    if not edits:
        raise ArgumentError("edits must be non-empty")
    if score_fn is None:
        score_fn = lambda text: vanilla_score(score_tokens(backend, condition, text, prompts))
    best_edit = None
    best_score = float("-inf")
    for edit in edits:
        text = backend.detokenize(edit.apply(hyp_tokens))
        score = score_fn(text)
        if score > best_score:
            best_edit, best_score = edit, score
    return best_edit, best_score


def _selection_score_fn(
    backend: ScorerBackend, condition: str, cfg: EvalConfig
) -> Callable[[str], float]:
    prompts = cfg.prompts

    def forward(text: str) -> float:
        return vanilla_score(score_tokens(backend, condition, text, prompts))

    def backward(text: str) -> float:
        return vanilla_score(score_tokens(backend, text, condition, prompts))

    if cfg.variant is Variant.RECALL:
        return backward
    if cfg.variant is Variant.F:
        return lambda text: (forward(text) + backward(text)) / 2.0
    return forward


def refine(
    backend: ScorerBackend,
    condition: str,
    hypothesis: str,
    cfg: Optional[EvalConfig] = None,
) -> RefinementTrace:
    """Run non-translation screening, then up to cfg.iterations edit rounds."""
    if not hypothesis:
        raise ArgumentError("hypothesis must be non-empty")
    cfg = cfg or EvalConfig()
    score_fn = _selection_score_fn(backend, condition, cfg)

    tokens = backend.tokenize(hypothesis)
    scored = score_tokens(backend, condition, hypothesis, cfg.prompts)
    verdict = non_translation_test(tokens, backend.tokenize(condition), scored, cfg)
    if verdict.flagged:
        return RefinementTrace((), hypothesis, StopReason.NON_TRANSLATION_SKIPPED, verdict)

    current_text = hypothesis
    if cfg.variant in (Variant.PRECISION, Variant.FAITHFULNESS):
        current_score = vanilla_score(scored)
    else:
        current_score = score_fn(hypothesis)
    iterations: list[RefinementIteration] = []
    stop_reason = StopReason.MAX_ITERATIONS
    for i in range(cfg.iterations):
        try:
            if i > 0:
                scored = score_tokens(backend, condition, current_text, cfg.prompts)
            idx = detect(scored)
            candidates = backend.topk(condition, scored.tokens[:idx], cfg.k)
            edits = propose_edits(scored.tokens, idx, candidates)
            edit, score = select_best(
                backend, condition, scored.tokens, edits, cfg.prompts, score_fn=score_fn
            )
        except BackendError as exc:
            raise type(exc)(f"refinement iteration {i}: {exc}") from exc
        if score <= current_score:
            iterations.append(
                RefinementIteration(
                    idx, scored.tokens[idx], tuple(candidates), None, current_score, current_score
                )
            )
            stop_reason = StopReason.EARLY_STOP
            break
        tokens = edit.apply(scored.tokens)
        current_text = backend.detokenize(tokens)
        iterations.append(
            RefinementIteration(
                idx, scored.tokens[idx], tuple(candidates), edit, current_score, score
            )
        )
        current_score = score
    return RefinementTrace(tuple(iterations), current_text, stop_reason, verdict)
