"""Explicit/implicit error distances and the weighted final score.

Refinement lifts the hypothesis score from BARTS(y, r) to BARTS(y*, r);
the lift is the explicit-error distance, the remaining gap to the
reference self-score is the implicit-error distance, and the final score
is the negated weighted sum of the two (0 is perfect, lower is worse).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import RefinementTrace, StopReason, refine
from .config import EvalConfig, NonTranslationWeighting
from .errors import ArgumentError
from .scorer import ScorerBackend, Variant, variant_score

# Refinement only accepts strict improvements, so a negative explicit
# distance can only be float noise; clamp within this tolerance.
_NEG_NOISE_TOL = 1e-9


@dataclass(frozen=True)
class ErrorReport:
    score_hyp: float
    score_refined: float
    score_ref_self: float
    dist_exp: float
    dist_imp: float
    final_score: float
    refined_text: str
    trace: RefinementTrace
    non_translation: bool


def explicit_distance(score_refined: float, score_hyp: float) -> float:
    """Score mass recovered by correcting explicit errors."""
    return score_refined - score_hyp


def implicit_distance(score_ref_self: float, score_refined: float) -> float:
    """Residual gap to the reference self-score after refinement.

    Pass ``score_ref_self = 0`` when multiple references are configured.
    """
    return score_ref_self - score_refined


def final_score(dist_exp: float, dist_imp: float, cfg: EvalConfig) -> float:
    """Negated weighted sum; ranges from -inf (worst) to 0 (perfect)."""
    return -(dist_exp * cfg.weight_exp + dist_imp * cfg.weight_imp)


def _clamp_explicit(value: float) -> float:
    if -_NEG_NOISE_TOL < value < 0.0:
        return 0.0
    return value


def _self_score(
    backend: ScorerBackend,
    source: Optional[str],
    references: Sequence[str],
    condition: str,
    cfg: EvalConfig,
) -> float:
    # Multi-reference mode zeroes the self-score: the reference signal is
    # ambiguous, so the absolute anchor is dropped.
    if len(references) > 1:
        return 0.0
    return variant_score(backend, source, references, condition, cfg.variant, cfg.prompts)


def evaluate(
    backend: ScorerBackend,
    source: Optional[str],
    references: Sequence[str],
    hypothesis: str,
    cfg: Optional[EvalConfig] = None,
) -> ErrorReport:
    """Score, refine, and assemble the full error report for one hypothesis."""
    cfg = cfg or EvalConfig()
    if not hypothesis:
        raise ArgumentError("hypothesis must be non-empty")
    if cfg.variant is Variant.FAITHFULNESS:
        if not source:
            raise ArgumentError("faithfulness variant requires a source")
        condition = source
    else:
        if not references:
            raise ArgumentError(f"{cfg.variant.value} variant requires a reference")
        condition = max(
            references,
            key=lambda r: variant_score(backend, source, [r], hypothesis, cfg.variant, cfg.prompts),
        )

    score_hyp = variant_score(backend, source, references, hypothesis, cfg.variant, cfg.prompts)
    score_ref_self = _self_score(backend, source, references, condition, cfg)
    trace = refine(backend, condition, hypothesis, cfg)

    if trace.stop_reason is StopReason.NON_TRANSLATION_SKIPPED:
        total = score_ref_self - score_hyp
        if cfg.non_translation_weighting is NonTranslationWeighting.EXPLICIT:
            dist_exp, dist_imp = total, 0.0
        else:
            dist_exp, dist_imp = 0.0, total
        return ErrorReport(
            score_hyp=score_hyp,
            score_refined=score_hyp,
            score_ref_self=score_ref_self,
            dist_exp=dist_exp,
            dist_imp=dist_imp,
            final_score=final_score(dist_exp, dist_imp, cfg),
            refined_text=hypothesis,
            trace=trace,
            non_translation=True,
        )

    score_refined = variant_score(
        backend, source, references, trace.final_text, cfg.variant, cfg.prompts
    )
    dist_exp = _clamp_explicit(explicit_distance(score_refined, score_hyp))
    dist_imp = implicit_distance(score_ref_self, score_refined)
    return ErrorReport(
        score_hyp=score_hyp,
        score_refined=score_refined,
        score_ref_self=score_ref_self,
        dist_exp=dist_exp,
        dist_imp=dist_imp,
        final_score=final_score(dist_exp, dist_imp, cfg),
        refined_text=trace.final_text,
        trace=trace,
        non_translation=False,
    )
