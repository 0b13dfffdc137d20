from sctkg.evaluation.fusion import (
    DiagnosisDistribution,
    FusionConfig,
    FusionResult,
    fuse,
    fuse_weighted,
    majority_vote,
    text_to_distribution,
    weight_sweep,
)
from sctkg.evaluation.gating import (
    ExpertScores,
    GatingMatrix,
    gate_score,
    moe_output,
    score_experts,
    select_experts,
    token_rate,
)
from sctkg.evaluation.metrics import (
    RUBRIC,
    BagOfWordsEmbedder,
    Embedder,
    bleu_n,
    code_prf,
    concept_coverage,
    cosine_sim,
    evaluate_corpus,
    evaluate_pair,
    rouge_l,
    tokenize,
)

__all__ = [
    "BagOfWordsEmbedder",
    "bleu_n",
    "code_prf",
    "concept_coverage",
    "cosine_sim",
    "DiagnosisDistribution",
    "Embedder",
    "evaluate_corpus",
    "evaluate_pair",
    "ExpertScores",
    "fuse",
    "fuse_weighted",
    "FusionConfig",
    "FusionResult",
    "gate_score",
    "GatingMatrix",
    "majority_vote",
    "moe_output",
    "rouge_l",
    "RUBRIC",
    "score_experts",
    "select_experts",
    "text_to_distribution",
    "token_rate",
    "tokenize",
    "weight_sweep",
]
