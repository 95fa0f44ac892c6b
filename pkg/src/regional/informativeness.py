"""Candidate scoring functions and the feature-similarity measure.

Scores are combined by the selection strategies; everything here is pure
except the model-random method, which draws from a caller-supplied stream.
"""

from __future__ import annotations

import enum
import math
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from regional.scene import CandidateObject

SIMPLEX_TOLERANCE = 1e-6


class MethodKind(enum.Enum):
    """Scoring method. Validity against an approach is checked by selection."""

    MAX_ENT = "maxent"
    MODEL_RAND = "modelrand"
    RANDOM = "random"
    DMAL = "dmal"


def _check_simplex(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("class_probs must be a nonempty 1-d vector")
    total = float(probs.sum())
    if abs(total - 1.0) > SIMPLEX_TOLERANCE or float(probs.min()) < -SIMPLEX_TOLERANCE:
        raise ValueError(f"class_probs off the probability simplex (sum={total!r})")
    return probs


def entropy(class_probs: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in nats, with 0*ln(0) taken as 0.

    Raises:
        ValueError: if the vector is off the simplex beyond 1e-6.
    """
    probs = _check_simplex(class_probs)
    positive = probs[probs > 0.0]
    return float(-np.sum(positive * np.log(positive)))


def entropy_rows(probs: np.ndarray) -> np.ndarray:
    """Row-wise entropy of an (n, C) array of probability vectors."""
    probs = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0.0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two feature vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"feature dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("zero feature vector has no direction")
    return float(np.dot(a, b) / (norm_a * norm_b))


def dmal_score(labeledness: float, class_probs: np.ndarray) -> float:
    """Labeledness plus entropy normalized by its ln(C) maximum.

    Normalizing puts both terms on a [0, 1] scale so neither dominates as the
    category count changes.
    """
    probs = _check_simplex(class_probs)
    n_classes = probs.size
    if n_classes == 1:
        return float(labeledness)
    return float(labeledness) + entropy(probs) / math.log(n_classes)


def score(candidate: "CandidateObject", method: MethodKind, rng: np.random.Generator | None = None) -> float:
    """Informativeness of one candidate under the given method.

    Model-random requires ``rng``; the DMAL method requires the candidate to
    carry a labeledness score.
    """
    if method is MethodKind.MAX_ENT:
        return entropy(candidate.class_probs)
    if method is MethodKind.DMAL:
        if candidate.labeledness is None:
            raise ValueError(
                f"candidate {candidate.id} has no labeledness score; "
                "the dmal method needs one (score file or synthesis)"
            )
        return dmal_score(candidate.labeledness, candidate.class_probs)
    if method is MethodKind.MODEL_RAND:
        if rng is None:
            raise ValueError("model-random scoring needs a random stream")
        return float(rng.random())
    raise ValueError(f"method {method.value} computes no per-object score")


def method_scores(
    candidates: Sequence["CandidateObject"],
    method: MethodKind,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Vector of scores for a candidate list, in list order.

    Model-random draws one uniform per candidate from ``rng`` in list order,
    so a fixed seed and iteration order reproduce the same scores.
    """
    if method is MethodKind.MODEL_RAND:
        if rng is None:
            raise ValueError("model-random scoring needs a random stream")
        return rng.random(len(candidates))
    if not candidates:
        return np.zeros(0, dtype=np.float64)
    if method is MethodKind.MAX_ENT:
        return entropy_rows(np.stack([c.class_probs for c in candidates]))
    if method is MethodKind.DMAL:
        missing = [c.id for c in candidates if c.labeledness is None]
        if missing:
            raise ValueError(
                f"{len(missing)} candidates have no labeledness score "
                f"(first: {missing[0]}); the dmal method needs one"
            )
        probs = np.stack([c.class_probs for c in candidates])
        n_classes = probs.shape[1]
        ent = entropy_rows(probs)
        if n_classes > 1:
            ent = ent / math.log(n_classes)
        else:
            ent = np.zeros_like(ent)
        return np.array([c.labeledness for c in candidates], dtype=np.float64) + ent
    raise ValueError(f"method {method.value} computes no per-object score")
