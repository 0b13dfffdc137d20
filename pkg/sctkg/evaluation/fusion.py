"""Combining the diagnosis distributions of two models: weighted aggregation or a majority vote.

.. code-block:: python

    fused, winner = fuse_weighted(
        DiagnosisDistribution({"A": 0.8, "B": 0.2}),
        DiagnosisDistribution({"A": 0.3, "B": 0.7}),
        FusionConfig(w_moe=0.6, w_esft=0.4),
    )
    # fused.probabilities == {"A": 0.6, "B": 0.4}, winner == "A"
"""
import collections
import dataclasses
import logging
from typing import List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np

from sctkg.evaluation.metrics import BagOfWordsEmbedder, Embedder

logger = logging.getLogger(__name__)

Strategy = Literal["weighted", "vote"]
SUM_TOLERANCE = 1e-9
DEFAULT_SWEEP_STEP = 0.1


@dataclasses.dataclass(frozen=True)
class DiagnosisDistribution:
    probabilities: Mapping[str, float]

    def __post_init__(self):
        if not self.probabilities:
            raise ValueError("A diagnosis distribution needs at least one label.")
        for label, value in self.probabilities.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Probability of {label!r} is {value}, outside [0, 1].")
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"Probabilities sum to {total}, not 1.")
        object.__setattr__(self, "probabilities", dict(self.probabilities))

    @classmethod
    def from_scores(cls, scores: Mapping[str, float]) -> "DiagnosisDistribution":
        """Normalizes non-negative scores to sum to 1."""
        total = sum(scores.values())
        if total <= 0 or any(v < 0 for v in scores.values()):
            raise ValueError("Scores must be non-negative with a positive sum.")
        return cls({label: value / total for label, value in scores.items()})

    def get(self, label: str) -> float:
        return self.probabilities.get(label, 0.0)

    @property
    def labels(self) -> List[str]:
        return sorted(self.probabilities)

    def argmax(self) -> str:
        """Most probable label, the lexicographically smallest among ties."""
        best = max(self.probabilities.values())
        return min(label for label, value in self.probabilities.items() if value == best)

    def to_dict(self) -> dict:
        return {label: self.probabilities[label] for label in self.labels}


@dataclasses.dataclass(frozen=True)
class FusionConfig:
    strategy: Strategy = "weighted"
    w_moe: float = 0.6
    w_esft: float = 0.4

    def __post_init__(self):
        if self.strategy not in ("weighted", "vote"):
            raise ValueError(f"Unknown strategy {self.strategy!r}. Expected 'weighted' or 'vote'.")
        if self.w_moe < 0 or self.w_esft < 0 or abs(self.w_moe + self.w_esft - 1.0) > SUM_TOLERANCE:
            raise ValueError(
                f"Weights must be non-negative and sum to 1, got {self.w_moe} and {self.w_esft}."
            )

    @classmethod
    def from_weights(
        cls, w_moe: float, w_esft: float, strategy: Strategy = "weighted"
    ) -> "FusionConfig":
        """Renormalizes any two non-negative weights with a positive sum."""
        total = w_moe + w_esft
        if total <= 0 or w_moe < 0 or w_esft < 0:
            raise ValueError(
                f"Weights must be non-negative with a positive sum, got {w_moe}, {w_esft}."
            )
        return cls(strategy, w_moe / total, w_esft / total)


def fuse_weighted(
    p_moe: DiagnosisDistribution,
    p_esft: DiagnosisDistribution,
    config: Optional[FusionConfig] = None,
) -> Tuple[DiagnosisDistribution, str]:
    """``fused(l) = w_moe * P_moe(l) + w_esft * P_esft(l)`` over the union of labels, a label
    missing from one side counting as 0 there.

    :return: The fused distribution and its argmax (ties go to the smallest label)
    """
    config = config if config is not None else FusionConfig()
    labels = sorted(set(p_moe.probabilities) | set(p_esft.probabilities))
    fused = DiagnosisDistribution(
        {
            label: min(1.0, config.w_moe * p_moe.get(label) + config.w_esft * p_esft.get(label))
            for label in labels
        }
    )
    return fused, fused.argmax()


def majority_vote(
    labels: Sequence[str],
    fallback: Optional[FusionConfig] = None,
    p_moe: Optional[DiagnosisDistribution] = None,
    p_esft: Optional[DiagnosisDistribution] = None,
) -> str:
    """The most frequent label. A tie for first place (which is every disagreement between two
    voters) is settled by the weighted winner of ``p_moe`` and ``p_esft`` under ``fallback``.

    :raises ValueError: if ``labels`` is empty, or a tie needs the distributions and they are
        missing
    """
    if not labels:
        raise ValueError("majority_vote needs at least one label")
    counts = collections.Counter(labels)
    top = max(counts.values())
    leaders = sorted(label for label, count in counts.items() if count == top)
    if len(leaders) == 1:
        return leaders[0]
    if p_moe is None or p_esft is None:
        raise ValueError(f"Tied vote between {leaders} and no distributions to fall back on.")
    _, winner = fuse_weighted(p_moe, p_esft, fallback)
    logger.debug("Tied vote between %s, weighted fallback picked %s", leaders, winner)
    return winner


@dataclasses.dataclass(frozen=True)
class FusionResult:
    strategy: Strategy
    winner: str
    fused: Optional[DiagnosisDistribution] = None
    votes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        result = {"strategy": self.strategy, "winner": self.winner}
        if self.fused is not None:
            result["fused"] = self.fused.to_dict()
        if self.votes:
            result["votes"] = list(self.votes)
        return result


def fuse(
    p_moe: DiagnosisDistribution,
    p_esft: DiagnosisDistribution,
    config: Optional[FusionConfig] = None,
) -> FusionResult:
    """Applies the configured strategy. Under ``vote`` each model votes for its argmax."""
    config = config if config is not None else FusionConfig()
    if config.strategy == "weighted":
        fused, winner = fuse_weighted(p_moe, p_esft, config)
        return FusionResult("weighted", winner, fused=fused)
    votes = (p_moe.argmax(), p_esft.argmax())
    return FusionResult("vote", majority_vote(votes, config, p_moe, p_esft), votes=votes)


def weight_sweep(
    p_moe: DiagnosisDistribution,
    p_esft: DiagnosisDistribution,
    step: float = DEFAULT_SWEEP_STEP,
) -> List[dict]:
    """Fuses at ``w_moe = 0, step, 2*step, ..., 1`` (``w_esft = 1 - w_moe``)."""
    if not 0 < step <= 1:
        raise ValueError(f"step must be in (0, 1], got {step}")
    count = int(round(1 / step))
    if abs(count * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    rows = []
    for w_moe in np.linspace(0.0, 1.0, count + 1):
        w_moe = round(float(w_moe), 12)
        config = FusionConfig("weighted", w_moe, round(1.0 - w_moe, 12))
        fused, winner = fuse_weighted(p_moe, p_esft, config)
        rows.append(
            {
                "w_moe": config.w_moe,
                "w_esft": config.w_esft,
                "winner": winner,
                "fused": fused.to_dict(),
            }
        )
    return rows


def text_to_distribution(
    text: str, labels: Sequence[str], embedder: Optional[Embedder] = None
) -> DiagnosisDistribution:
    """Maps free-text model output onto a label list.

    An exact match (ignoring case and surrounding whitespace) gets probability 1. Otherwise each
    label is weighted by its non-negative cosine similarity to the text and the weights are
    renormalized; with no similarity at all the distribution is uniform.
    """
    if not labels:
        raise ValueError("text_to_distribution needs at least one label")
    wanted = text.strip().lower()
    for label in labels:
        if label.strip().lower() == wanted:
            return DiagnosisDistribution({other: float(other == label) for other in labels})
    embedder = embedder if embedder is not None else BagOfWordsEmbedder()
    weights = {label: max(0.0, embedder.similarity(text, label)) for label in labels}
    if sum(weights.values()) == 0:
        return DiagnosisDistribution.from_scores({label: 1.0 for label in labels})
    return DiagnosisDistribution.from_scores(weights)
