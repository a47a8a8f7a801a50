"""Slow, transparent reference implementations.

These exist to check the main code paths and must not share their
numerics: normalization here is plain probability-space summation with
compensated accumulation (math.fsum), never log-sum-exp; Shapley values
come from the subset-sum definition with exact combinatorial weights,
never from a regression; subset search is a full scan.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import AllZeroMass
from .spaces import ExplanationSpace
from .types import Explanation, LearnerModel, TargetInference


def _prior_weight(space: ExplanationSpace, x: Explanation) -> float:
    fn = getattr(space, "prior_weight", None)
    if callable(fn):
        return fn(x)
    return math.exp(space.log_prior(x))


def exhaustive_posterior(
    learner: LearnerModel,
    theta: TargetInference,
    space: ExplanationSpace,
) -> tuple[tuple[Explanation, ...], np.ndarray]:
    """Normalize likelihood * prior by direct summation.

    Returns the positive-prior support in enumeration order and the
    normalized probabilities, aligned.
    """
    support: list[Explanation] = []
    weights: list[float] = []
    for x in space.elements():
        prior = _prior_weight(space, x)
        if prior > 0.0:
            support.append(x)
            weights.append(learner.likelihood(theta, x) * prior)
    if not support:
        raise AllZeroMass(f"{space.descriptor}: no candidate has positive prior weight")
    total = math.fsum(weights)
    if total <= 0.0:
        raise AllZeroMass(f"{space.descriptor}: total candidate mass is zero")
    probs = np.array([w / total for w in weights])
    return tuple(support), probs


def best_subset_bruteforce(
    learner: LearnerModel,
    theta: TargetInference,
    space: ExplanationSpace,
) -> Explanation:
    """Full scan for the maximum-weight candidate; first winner stands."""
    best: Explanation | None = None
    best_w = -1.0
    any_prior = False
    for x in space.elements():
        prior = _prior_weight(space, x)
        if prior <= 0.0:
            continue
        any_prior = True
        w = learner.likelihood(theta, x) * prior
        if w > best_w:
            best, best_w = x, w
    if not any_prior:
        raise AllZeroMass(f"{space.descriptor}: no candidate has positive prior weight")
    if best_w <= 0.0:
        raise AllZeroMass(f"{space.descriptor}: every candidate has zero weight")
    return best


def exact_shapley(value_fn: Callable[[tuple[int, ...]], float], n_features: int) -> np.ndarray:
    """Shapley values straight from the definition.

    phi_j = sum over coalitions S not containing j of
    v(S + j) - v(S), weighted by 1 / (n * C(n-1, |S|)).
    Every coalition value is computed once; the per-feature sums use
    compensated accumulation.
    """
    d = int(n_features)
    values = {}
    for bits in range(1 << d):
        coalition = tuple(j for j in range(d) if bits >> j & 1)
        values[bits] = float(value_fn(coalition))

    phi = np.zeros(d)
    for j in range(d):
        terms = []
        for bits in range(1 << d):
            if bits >> j & 1:
                continue
            s = bin(bits).count("1")
            weight = 1.0 / (d * math.comb(d - 1, s))
            terms.append(weight * (values[bits | 1 << j] - values[bits]))
        phi[j] = math.fsum(terms)
    return phi


def coalition_value_fn(
    predict: Callable[[np.ndarray], np.ndarray],
    point: np.ndarray,
    background: np.ndarray,
    class_index: int,
) -> Callable[[tuple[int, ...]], float]:
    """Value of a coalition: mean model output with the coalition's
    features taken from the point and the rest from each background row.

    Written loop-first on purpose; the fast path lives elsewhere.
    """
    point = np.asarray(point, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))

    def value(coalition: tuple[int, ...]) -> float:
        outputs = []
        for row in background:
            z = row.copy()
            for j in coalition:
                z[j] = point[j]
            outputs.append(float(predict(z[None, :])[0, class_index]))
        return math.fsum(outputs) / len(outputs)

    return value
