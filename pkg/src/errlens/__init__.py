"""errlens: text-generation scoring with explicit/implicit error analysis.

Scores a hypothesis by iteratively detecting and correcting its worst
tokens under a conditional language model, splits the quality gap into
explicit- and implicit-error distances, combines them into a single
weighted score, and meta-evaluates metrics against human judgments.
"""

from .analysis import (
    Edit,
    EditOp,
    NonTranslationVerdict,
    RefinementIteration,
    RefinementTrace,
    StopReason,
    detect,
    non_translation_test,
    propose_edits,
    refine,
    select_best,
)
from .config import EvalConfig, NonTranslationWeighting
from .errors import (
    ArgumentError,
    BackendError,
    DataError,
    ErrlensError,
    ParseError,
    ProtocolError,
    ServerError,
    TransportError,
    UndefinedCorrelationError,
)
from .metric import (
    ErrorReport,
    evaluate,
    explicit_distance,
    final_score,
    implicit_distance,
)
from .metaeval import (
    CorrelationKind,
    CorrelationResult,
    DarrJudgment,
    bootstrap_significance,
    kendall_darr,
    pairwise_accuracy,
    pearson,
    remove_outlier_systems,
    spearman,
    topk_filter,
    weight_sweep,
)
from .ngram import NgramBackend, OracleModel, oracle_logprob, oracle_topk, word_tokenize
from .remote import RemoteBackend, ServerEndpoint
from .scorer import (
    Direction,
    PromptSet,
    ScoredSequence,
    ScorerBackend,
    Token,
    Variant,
    score_tokens,
    vanilla_score,
    variant_score,
)

__version__ = "0.1.0"
