"""Expert scoring for mixture-of-experts models, computed from recorded gate values.

For a gate matrix ``G`` of ``T`` tokens by ``N`` experts:

- gate score of expert i: ``(1/T) * sum_t G[t, i]``
- token selection rate of expert i: ``(1/T) * sum_t 1{G[t, i] > 0}``

Experts whose chosen score is at least the threshold ``p`` are selected.
"""
import dataclasses
import logging
from typing import FrozenSet, Literal, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

Metric = Literal["gate", "token"]
ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]

ROW_SUM_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class GatingMatrix:
    """T x N gate values, all >= 0. ``row_stochastic`` flags whether every row sums to 1, which
    holds for matrices built with :py:meth:`normalize` or :py:meth:`from_logits`."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"Expected a non-empty T x N matrix, got shape {values.shape}.")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("Gate values must be finite and >= 0.")
        object.__setattr__(self, "values", values)

    @classmethod
    def normalize(cls, values: ArrayLike) -> "GatingMatrix":
        raw = np.asarray(values, dtype=float)
        if raw.ndim != 2 or raw.size == 0:
            raise ValueError(f"Expected a non-empty T x N matrix, got shape {raw.shape}.")
        sums = raw.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValueError("Every token row needs a positive sum to normalize.")
        return cls(raw / sums)

    @classmethod
    def from_logits(cls, logits: ArrayLike) -> "GatingMatrix":
        """Softmax over experts, per token."""
        raw = np.asarray(logits, dtype=float)
        if raw.ndim != 2 or raw.size == 0:
            raise ValueError(f"Expected a non-empty T x N matrix, got shape {raw.shape}.")
        shifted = np.exp(raw - raw.max(axis=1, keepdims=True))
        return cls(shifted / shifted.sum(axis=1, keepdims=True))

    @property
    def tokens(self) -> int:
        return self.values.shape[0]

    @property
    def experts(self) -> int:
        return self.values.shape[1]

    @property
    def row_stochastic(self) -> bool:
        return bool(np.all(np.abs(self.values.sum(axis=1) - 1.0) <= ROW_SUM_TOLERANCE))


def _matrix(G: Union[GatingMatrix, ArrayLike]) -> np.ndarray:
    return G.values if isinstance(G, GatingMatrix) else GatingMatrix(G).values


def moe_output(gate_row: Sequence[float], expert_outputs: ArrayLike) -> np.ndarray:
    """Reference layer output for one token: ``y = sum_i G_i * E_i(x)``.

    :param gate_row: The token's N gate values
    :param expert_outputs: N expert output vectors, one per row
    """
    gates = np.asarray(gate_row, dtype=float)
    outputs = np.asarray(expert_outputs, dtype=float)
    if gates.ndim != 1 or outputs.ndim != 2 or outputs.shape[0] != gates.shape[0]:
        raise ValueError(
            f"Gate row of shape {gates.shape} does not match expert outputs of shape "
            f"{outputs.shape}."
        )
    return gates @ outputs


def gate_score(G: Union[GatingMatrix, ArrayLike]) -> np.ndarray:
    return _matrix(G).mean(axis=0)


def token_rate(G: Union[GatingMatrix, ArrayLike]) -> np.ndarray:
    return (_matrix(G) > 0).mean(axis=0)


def select_experts(
    scores: Union["ExpertScores", Sequence[float]], p: float, metric: Metric = "gate"
) -> FrozenSet[int]:
    """Indices with ``score >= p``. Given an :py:class:`ExpertScores`, ``metric`` picks which of
    its vectors is compared."""
    if isinstance(scores, ExpertScores):
        scores = scores.gate_scores if metric == "gate" else scores.token_rates
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Threshold p must be in [0, 1], got {p}.")
    return frozenset(int(i) for i in np.flatnonzero(np.asarray(scores, dtype=float) >= p))


@dataclasses.dataclass(frozen=True)
class ExpertScores:
    gate_scores: np.ndarray
    token_rates: np.ndarray
    threshold: float
    metric: Metric
    selected: FrozenSet[int]

    def to_dict(self) -> dict:
        return {
            "gate_scores": self.gate_scores.tolist(),
            "token_rates": self.token_rates.tolist(),
            "threshold": self.threshold,
            "metric": self.metric,
            "selected": sorted(self.selected),
        }


def score_experts(
    G: Union[GatingMatrix, ArrayLike], p: float, metric: Metric = "gate"
) -> ExpertScores:
    if metric not in ("gate", "token"):
        raise ValueError(f"Unknown metric {metric!r}. Expected 'gate' or 'token'.")
    gates, rates = gate_score(G), token_rate(G)
    selected = select_experts(gates if metric == "gate" else rates, p)
    logger.debug("Selected experts %s at p=%s by %s score", sorted(selected), p, metric)
    return ExpertScores(gates, rates, p, metric, selected)
