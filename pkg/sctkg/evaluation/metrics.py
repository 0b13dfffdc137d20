"""Automatic text metrics for generated diagnoses: BLEU-1..4 with brevity penalty, ROUGE-L, and
cosine similarity of embeddings, plus diagnosis-code precision/recall and key-concept coverage.
"""
import abc
import collections
import logging
import math
import re
import zlib
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

Tokenizer = Callable[[str], List[str]]

_TOKEN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str, lowercase: bool = False) -> List[str]:
    """Splits on Unicode whitespace and detaches each punctuation character as its own token."""
    return _TOKEN.findall(text.lower() if lowercase else text)


def ngrams(tokens: Sequence[str], n: int) -> collections.Counter:
    return collections.Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_reference_length(candidate_length: int, references: Sequence[Sequence[str]]) -> int:
    lengths = (len(r) for r in references)
    return min(lengths, key=lambda length: (abs(length - candidate_length), length))


def bleu_n(
    candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4
) -> List[float]:
    """BLEU-1 through BLEU-``max_n`` for one candidate.

    Modified n-gram precision clips each candidate n-gram count by its largest count in any
    single reference. The brevity penalty is ``exp(1 - r/c)`` when the candidate length ``c`` is
    not longer than the closest reference length ``r`` (ties go to the shorter reference).
    BLEU-n is ``BP * exp(mean(log p_1..p_n))`` and 0 when any of those precisions is 0.

    .. code-block:: python

        bleu_n("the cat".split(), ["the cat sat".split()], max_n=1)  # [0.6065...]

    :return: ``max_n`` scores, BLEU-1 first
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in [1, 4], got {max_n}")
    if not references:
        raise ValueError("at least one reference is needed")
    if not candidate:
        logger.warning("Empty candidate, BLEU is 0")
        return [0.0] * max_n
    precisions = []
    for k in range(1, max_n + 1):
        counts = ngrams(candidate, k)
        max_ref = collections.Counter()
        for reference in references:
            for gram, count in ngrams(reference, k).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in counts.items())
        total = sum(counts.values())
        precisions.append(clipped / total if total else 0.0)
    c = len(candidate)
    r = _closest_reference_length(c, references)
    brevity_penalty = 1.0 if c > r else math.exp(1 - r / c)
    scores = []
    for n in range(1, max_n + 1):
        head = precisions[:n]
        if min(head) == 0:
            scores.append(0.0)
        else:
            scores.append(brevity_penalty * math.exp(sum(math.log(p) for p in head) / n))
    return scores


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[-1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> Tuple[float, float, float]:
    """:return: ``(precision, recall, f1)`` from the longest common subsequence"""
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def cosine_sim(x: Sequence[float], y: Sequence[float]) -> float:
    """``x . y / (|x| |y|)``; 0 (with a warning) when either vector is all zeros."""
    a, b = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"Vectors must be 1-d of equal length, got {a.shape} and {b.shape}.")
    norms = np.linalg.norm(a) * np.linalg.norm(b)
    if norms == 0:
        logger.warning("Cosine similarity with a zero vector, returning 0")
        return 0.0
    return float(np.clip(a @ b / norms, -1.0, 1.0))


class Embedder(abc.ABC):
    @abc.abstractmethod
    def embed(self, text: str) -> np.ndarray:
        pass

    def similarity(self, a: str, b: str) -> float:
        return cosine_sim(self.embed(a), self.embed(b))


class BagOfWordsEmbedder(Embedder):
    """L2-normalized term frequencies over a hashed vocabulary of ``dimensions`` buckets."""

    def __init__(self, dimensions: int = 4096, tokenizer: Optional[Tokenizer] = None):
        if dimensions < 1:
            raise ValueError(f"dimensions must be >= 1, got {dimensions}")
        self.dimensions = dimensions
        self.tokenizer = tokenizer if tokenizer is not None else (lambda t: tokenize(t, True))

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimensions)
        for token in self.tokenizer(text):
            vector[zlib.crc32(token.encode("utf-8")) % self.dimensions] += 1.0
        norm = np.linalg.norm(vector)
        return vector / norm if norm else vector


def code_prf(
    predicted_codes: Iterable[str], reference_codes: Iterable[str]
) -> Tuple[float, float, float]:
    """Set precision, recall and F1 of predicted diagnosis codes against the reference codes."""
    predicted = {c.strip().upper() for c in predicted_codes if c.strip()}
    reference = {c.strip().upper() for c in reference_codes if c.strip()}
    hits = len(predicted & reference)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(reference) if reference else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def concept_coverage(text: str, key_concepts: Iterable[str]) -> float:
    """Share of key concepts mentioned in ``text`` (case-insensitive, whole tokens). 1.0 when
    there are no key concepts."""
    tokens = tokenize(text, lowercase=True)
    joined = f" {' '.join(tokens)} "
    concepts = [c for c in key_concepts if c.strip()]
    if not concepts:
        return 1.0
    found = sum(1 for c in concepts if f" {' '.join(tokenize(c, lowercase=True))} " in joined)
    return found / len(concepts)


def evaluate_pair(
    candidate: str,
    reference: str,
    tokenizer: Optional[Tokenizer] = None,
    embedder: Optional[Embedder] = None,
) -> Dict[str, float]:
    tokenizer = tokenizer if tokenizer is not None else tokenize
    embedder = embedder if embedder is not None else BagOfWordsEmbedder()
    cand, ref = tokenizer(candidate), tokenizer(reference)
    scores = {f"bleu_{n}": s for n, s in enumerate(bleu_n(cand, [ref], 4), start=1)}
    precision, recall, f1 = rouge_l(cand, ref)
    scores.update(rouge_l_precision=precision, rouge_l_recall=recall, rouge_l_f1=f1)
    scores["cosine"] = embedder.similarity(candidate, reference)
    return scores


def evaluate_corpus(
    pairs: Sequence[Tuple[str, str, str]],
    tokenizer: Optional[Tokenizer] = None,
    embedder: Optional[Embedder] = None,
) -> dict:
    """Scores ``(record id, candidate, reference)`` triples.

    :return: ``{"records": [{"id": ..., <metric>: ...}], "corpus": {<metric>: mean}}``
    """
    embedder = embedder if embedder is not None else BagOfWordsEmbedder()
    records = []
    for record_id, candidate, reference in pairs:
        scores = evaluate_pair(candidate, reference, tokenizer, embedder)
        records.append({"id": record_id, **scores})
    metrics = [key for key in records[0] if key != "id"] if records else []
    corpus = {key: float(np.mean([r[key] for r in records])) for key in metrics}
    return {"records": records, "corpus": corpus, "count": len(records)}


# Integer 0-5 scale for the two expert-rated dimensions (clarity, usability). Reference only.
RUBRIC: Dict[str, str] = {
    "0-1": "Very poor: severely incomplete or wrong, key findings missing, hardly usable.",
    "2": "Poor: limited coverage, obvious errors, unclear; needs substantial correction.",
    "3": "Fair: core content mostly right with minor gaps; usable with caution.",
    "4": "Good: fairly complete, accurate and clear; needs minimal adjustment.",
    "5": "Excellent: complete, accurate and coherent; usable without changes.",
}
EVALUATION_DIMENSIONS = {
    "accuracy": "diagnosis code precision / recall / F1",
    "completeness": "key clinical concept coverage",
    "clarity": "expert rated, see RUBRIC",
    "usability": "expert rated, see RUBRIC",
}
