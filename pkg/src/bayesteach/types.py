"""Domain types shared across the engine.

An inference target (what the explanation should teach) and an explanation
(the artifact shown to the learner) are tagged unions: a kind plus a
payload. Payloads are canonicalized to hashable keys so explanations can
index dictionaries and histograms regardless of payload representation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class ThetaKind(enum.Enum):
    """What aspect of the target model an explanation is meant to convey."""

    PREDICTED_LABEL = "predicted-label"
    PREDICTIVE_DISTRIBUTION = "predictive-distribution"
    CLASS_DATA_DISTRIBUTION = "class-data-distribution"
    LOCAL_DECISION_BOUNDARY = "local-decision-boundary"
    LATENT_CLASS_MEANS = "latent-class-means"

    # Kinds that describe the target model's input-output behaviour rather
    # than its internal parameters. LATENT_CLASS_MEANS is the one
    # parameter-level kind and is treated specially by recombination.
    @property
    def is_generalization_level(self) -> bool:
        return self is not ThetaKind.LATENT_CLASS_MEANS


class ExplanationKind(enum.Enum):
    EXAMPLE_SET = "example-set"
    FEATURE_MASK = "feature-mask"
    SALIENCY_VECTOR = "saliency-vector"
    LINEAR_WEIGHTS = "linear-weights"
    SOFT_TREE = "soft-tree"


def _canonical(value: Any) -> Any:
    """Reduce a payload to a hashable, equality-comparable form."""
    if isinstance(value, np.ndarray):
        return (value.shape, str(value.dtype), value.tobytes())
    if isinstance(value, (tuple, list)):
        return tuple(_canonical(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, _canonical(v)) for k, v in value.items()))
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    key_fn = getattr(value, "key", None)
    if callable(key_fn):
        return key_fn()
    return value


@dataclass(frozen=True, eq=False)
class TargetInference:
    """A candidate inference about the target model: kind plus payload.

    Payload conventions by kind:
      PREDICTED_LABEL           int class index
      PREDICTIVE_DISTRIBUTION   (points (n, d), probabilities (n, C))
      CLASS_DATA_DISTRIBUTION   (reference points (n, d), class index)
      LOCAL_DECISION_BOUNDARY   (point (d,), kernel width)
      LATENT_CLASS_MEANS        (C, q) array of latent class means
    """

    kind: ThetaKind
    payload: Any

    def key(self) -> tuple:
        return (self.kind, _canonical(self.payload))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TargetInference) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


@dataclass(frozen=True, eq=False)
class Explanation:
    """One candidate explanation: kind plus payload.

    Payload conventions by kind:
      EXAMPLE_SET      tuple of dataset row indices (distinct)
      FEATURE_MASK     (d,) array of {0, 1}
      SALIENCY_VECTOR  (d,) array of nonnegative reals
      LINEAR_WEIGHTS   (weights (d,), intercept)
      SOFT_TREE        SoftTree instance
    """

    kind: ExplanationKind
    payload: Any

    def key(self) -> tuple:
        return (self.kind, _canonical(self.payload))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Explanation) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())


def example_set(indices) -> Explanation:
    return Explanation(ExplanationKind.EXAMPLE_SET, tuple(int(i) for i in indices))


def feature_mask(bits) -> Explanation:
    arr = np.asarray(bits, dtype=np.int8)
    return Explanation(ExplanationKind.FEATURE_MASK, arr)


@dataclass(frozen=True)
class LearnerModel:
    """A learner: a likelihood over inference targets given an explanation.

    The likelihood is held in log space; a value of -inf means the learner
    assigns the pair zero probability. ``likelihood`` exposes the plain
    nonnegative value for callers that work in probability space.
    """

    description: str
    log_likelihood: Callable[[TargetInference, Explanation], float]

    def likelihood(self, theta: TargetInference, x: Explanation) -> float:
        return math.exp(self.log_likelihood(theta, x))

    @staticmethod
    def from_likelihood(description: str, fn: Callable[[TargetInference, Explanation], float]) -> "LearnerModel":
        def log_fn(theta: TargetInference, x: Explanation) -> float:
            value = fn(theta, x)
            if value < 0:
                raise ValueError(f"likelihood must be nonnegative, got {value}")
            return math.log(value) if value > 0 else -math.inf

        return LearnerModel(description, log_fn)


@dataclass(frozen=True)
class TeacherPosterior:
    """Normalized teacher posterior over an enumerated explanation support.

    ``support`` lists the positive-prior elements in enumeration order.
    ``log_weights`` holds the unnormalized log(likelihood * prior) per
    element; ``log_normalizer`` is their log-sum-exp.
    """

    support: tuple[Explanation, ...]
    log_weights: np.ndarray = field(repr=False)
    log_normalizer: float

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_normalizer)

    def __len__(self) -> int:
        return len(self.support)
