"""Method hyperparameters shared by refinement and scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import ArgumentError
from .scorer import PromptSet, Variant

DEFAULT_K = 10
DEFAULT_ITERATIONS = 5
DEFAULT_WEIGHT_EXP = 1.4
DEFAULT_WEIGHT_IMP = 1.0
DEFAULT_OVERLAP_THRESHOLD = 0.15
DEFAULT_LOW_PROB_THRESHOLD = 0.6


class NonTranslationWeighting(Enum):
    """Which side absorbs the whole distance for flagged hypotheses."""

    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


@dataclass(frozen=True)
class EvalConfig:
    k: int = DEFAULT_K
    iterations: int = DEFAULT_ITERATIONS
    weight_exp: float = DEFAULT_WEIGHT_EXP
    weight_imp: float = DEFAULT_WEIGHT_IMP
    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD
    low_prob_threshold: float = DEFAULT_LOW_PROB_THRESHOLD
    variant: Variant = Variant.PRECISION
    prompts: PromptSet = field(default_factory=PromptSet.empty)
    non_translation_weighting: NonTranslationWeighting = NonTranslationWeighting.EXPLICIT

    def __post_init__(self):
        if self.k < 1:
            raise ArgumentError("k must be >= 1")
        if self.iterations < 1:
            raise ArgumentError("iterations must be >= 1")
        for name in ("weight_exp", "weight_imp"):
            w = getattr(self, name)
            if not math.isfinite(w) or w <= 0:
                raise ArgumentError(f"{name} must be a finite positive number")
        for name in ("overlap_threshold", "low_prob_threshold"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise ArgumentError(f"{name} must lie in [0, 1]")
