"""Agreement between metric outputs and human judgments.

DARR Kendall's tau, Spearman/Pearson, pairwise accuracy, paired-bootstrap
significance, MAD-based outlier-system removal, top-K system filtering,
and explicit/implicit weight-ratio sweeps over precomputed distances.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .config import EvalConfig
from .errors import ArgumentError, DataError, UndefinedCorrelationError

# (system, segment_id) -> score
SegmentScores = Mapping[tuple[str, str], float]
HumanScores = Mapping[tuple[str, str], float]

DEFAULT_OUTLIER_CUTOFF = 2.5
DEFAULT_RESAMPLES = 1000


@dataclass(frozen=True)
class DarrJudgment:
    segment_id: str
    system_better: str
    system_worse: str

    def __post_init__(self):
        if self.system_better == self.system_worse:
            raise DataError(
                f"DARR judgment for segment {self.segment_id!r} pairs a system with itself"
            )


class CorrelationKind(Enum):
    KENDALL_DARR = "kendall_darr"
    SPEARMAN = "spearman"
    PEARSON = "pearson"
    ACCURACY = "accuracy"


@dataclass(frozen=True)
class CorrelationResult:
    statistic: float
    n_items: int
    kind: CorrelationKind

    def __post_init__(self):
        if self.n_items < 1:
            raise DataError("correlation over zero items is undefined")


def _score_of(scores: SegmentScores, system: str, segment_id: str) -> float:
    try:
        return scores[(system, segment_id)]
    except KeyError:
        raise DataError(f"missing metric score for system={system!r} segment={segment_id!r}")


def _concordance(judgments: Sequence[DarrJudgment], scores: SegmentScores) -> np.ndarray:
    """Per-judgment booleans; ties count against the metric (discordant)."""
    return np.array(
        [
            _score_of(scores, j.system_better, j.segment_id)
            > _score_of(scores, j.system_worse, j.segment_id)
            for j in judgments
        ],
        dtype=bool,
    )


def kendall_darr(judgments: Sequence[DarrJudgment], scores: SegmentScores) -> CorrelationResult:
    """DARR-form tau: (concordant - discordant) / (concordant + discordant)."""
    if not judgments:
        raise DataError("kendall_darr requires at least one judgment")
    conc = _concordance(judgments, scores)
    n = len(conc)
    tau = (2 * int(conc.sum()) - n) / n
    return CorrelationResult(tau, n, CorrelationKind.KENDALL_DARR)


def _check_pair(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) != len(y):
        raise ArgumentError("x and y must have equal lengths")
    if len(x) < 2:
        raise ArgumentError("correlation requires at least two points")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise UndefinedCorrelationError("correlation is undefined for constant input")


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Rank correlation with average ranks for ties."""
    _check_pair(x, y)
    rho = scipy_stats.spearmanr(x, y).statistic
    return CorrelationResult(float(rho), len(x), CorrelationKind.SPEARMAN)


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    _check_pair(x, y)
    r = scipy_stats.pearsonr(x, y).statistic
    return CorrelationResult(float(r), len(x), CorrelationKind.PEARSON)


def pairwise_accuracy(pairs: Sequence[tuple[float, float]]) -> CorrelationResult:
    """Fraction of (correct, incorrect) pairs the metric orders correctly."""
    if not pairs:
        raise ArgumentError("pairwise_accuracy requires at least one pair")
    correct = sum(1 for good, bad in pairs if good > bad)
    return CorrelationResult(correct / len(pairs), len(pairs), CorrelationKind.ACCURACY)


def bootstrap_significance(
    judgments: Sequence[DarrJudgment],
    scores_a: SegmentScores,
    scores_b: SegmentScores,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> float:
    """Paired bootstrap p-value for "the observed winner really wins".

    Judgments are resampled with replacement; p is the fraction of
    resamples in which the observed winner does not strictly win.
    Deterministic under a fixed seed.
    """
    if resamples < 100:
        raise ArgumentError("resamples must be >= 100")
    if not judgments:
        raise DataError("bootstrap requires at least one judgment")
    conc_a = _concordance(judgments, scores_a)
    conc_b = _concordance(judgments, scores_b)
    n = len(judgments)
    observed = (int(conc_a.sum()) - int(conc_b.sum())) / n  # tau_a - tau_b, scaled by 2
    # Winner-oriented delta: positive means the observed winner wins.
    sign = 1.0 if observed >= 0 else -1.0
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    delta = conc_a[idx].sum(axis=1) - conc_b[idx].sum(axis=1)
    losses = int(np.count_nonzero(sign * delta <= 0))
    return losses / resamples


def remove_outlier_systems(
    system_scores: Mapping[str, float], cutoff: float = DEFAULT_OUTLIER_CUTOFF
) -> set[str]:
    """Retain systems within cutoff * MAD of the median score."""
    if len(system_scores) < 3:
        raise ArgumentError("outlier removal requires at least 3 systems")
    values = np.array(list(system_scores.values()), dtype=float)
    median = float(np.median(values))
    mad = float(np.median(np.abs(values - median)))
    if mad == 0.0:
        return set(system_scores)
    return {
        system
        for system, score in system_scores.items()
        if abs(score - median) <= cutoff * mad
    }


def topk_filter(human: HumanScores, k: int) -> set[str]:
    """The k systems with the highest mean human score; ties by name."""
    totals: dict[str, list[float]] = {}
    for (system, _), score in human.items():
        totals.setdefault(system, []).append(score)
    if not 1 <= k <= len(totals):
        raise ArgumentError(f"k must lie in [1, {len(totals)}]")
    ranked = sorted(totals, key=lambda s: (-(sum(totals[s]) / len(totals[s])), s))
    return set(ranked[:k])


# (system, segment_id) -> (dist_exp, dist_imp); refinement already ran.
DistanceTable = Mapping[tuple[str, str], tuple[float, float]]


def weight_sweep(
    distances: DistanceTable,
    judgments: Sequence[DarrJudgment],
    cfg_base: EvalConfig,
    ratios: Sequence[float],
) -> list[tuple[float, CorrelationResult]]:
    """Re-weight precomputed distances and re-correlate, per ratio.

    Weights are (ratio, 1) applied to (dist_exp, dist_imp); no scoring
    backend is touched. cfg_base fixes everything except the ratio.
    """
    del cfg_base  # distances are final; nothing else to re-derive
    results = []
    for ratio in ratios:
        scores = {
            key: -(de * ratio + di * 1.0) for key, (de, di) in distances.items()
        }
        try:
            results.append((ratio, kendall_darr(judgments, scores)))
        except DataError as exc:
            raise DataError(f"weight ratio {ratio}: {exc}") from exc
    return results
