"""Word-level adversarial example generation against black-box text
classifiers, with LLM-sourced synonym substitution under a validity and
naturalness constraint stack, plus an evaluation harness."""

from .core import (
    AttackConfig,
    AttackRecord,
    Edit,
    LabelDistribution,
    Perturbation,
    Sample,
    StepTrace,
    TokenizedText,
    apply_edits,
    modification_budget,
    modification_rate,
    perturbation_norm,
    word_diff,
)
from .engine import attack, attack_batch
from .evalsuite import (
    DatasetDescriptor,
    EvaluationReport,
    JudgeResult,
    aggregate_dgm,
    compute_report,
    grid_search_k,
    llm_judge,
    load_dataset,
    run_experiment,
    success_rate_from_accuracies,
)
from .gateways import (
    EmbeddingStore,
    EncoderUnavailable,
    GatewayError,
    GatewaySet,
    HashingSentenceEncoder,
    HttpChatLLM,
    HttpVictim,
    LexiconVictim,
    SynonymProviderUnavailable,
)
from .importance import CandidateList, ImportanceScore, mask_word, rank_words
from .linguistics import AnnotationError, AnnotatorBundle
from .review_api import ReviewStore, build_review_items, make_review_app
from .substitution import (
    CandidateReplacement,
    ConstraintVerdict,
    SynonymCache,
    SynonymRequest,
    build_provider,
    check_candidate,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "AnnotatorBundle",
    "AttackConfig",
    "AttackRecord",
    "CandidateList",
    "CandidateReplacement",
    "ConstraintVerdict",
    "DatasetDescriptor",
    "Edit",
    "EmbeddingStore",
    "EncoderUnavailable",
    "EvaluationReport",
    "GatewayError",
    "GatewaySet",
    "HashingSentenceEncoder",
    "HttpChatLLM",
    "HttpVictim",
    "ImportanceScore",
    "JudgeResult",
    "LabelDistribution",
    "LexiconVictim",
    "Perturbation",
    "ReviewStore",
    "Sample",
    "StepTrace",
    "SynonymCache",
    "SynonymProviderUnavailable",
    "SynonymRequest",
    "TokenizedText",
    "aggregate_dgm",
    "apply_edits",
    "attack",
    "attack_batch",
    "build_provider",
    "build_review_items",
    "check_candidate",
    "compute_report",
    "grid_search_k",
    "llm_judge",
    "load_dataset",
    "make_review_app",
    "mask_word",
    "modification_budget",
    "modification_rate",
    "perturbation_norm",
    "rank_words",
    "run_experiment",
    "success_rate_from_accuracies",
    "word_diff",
]
