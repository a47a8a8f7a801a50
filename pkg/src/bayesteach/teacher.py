"""One entry point over the search strategies.

Every explanation method reduces to: pick a learner, an inference
target, and a candidate space, then search. This module gives the
searches a uniform interface so methods can be rebuilt from parts.

  exhaustive-max   normalize everything, take the argmax
  greedy           forward selection over subset slots
  mh-sample        Metropolis walk, returns the trace
  mc-expectation   likelihood-weighted average of prior draws
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import core
from .errors import BadSpec, StrategySpaceMismatch
from .explainers import weighted_mean_and_stderr
from .spaces import ExplanationSpace, MaskSpace, SubsetSpace
from .types import (
    Explanation,
    ExplanationKind,
    LearnerModel,
    TargetInference,
    example_set,
)

STRATEGIES = ("exhaustive-max", "greedy", "mh-sample", "mc-expectation")


@dataclass(frozen=True)
class StrategyResult:
    explanation: Explanation
    strategy: str
    metadata: dict = field(default_factory=dict)
    samples: tuple[Explanation, ...] | None = None
    stderr: np.ndarray | None = field(default=None, repr=False)


def run_strategy(
    learner: LearnerModel,
    theta: TargetInference,
    space: ExplanationSpace,
    strategy: str,
    seed: int = 0,
    threads: int = 1,
    **options,
) -> StrategyResult:
    if strategy == "exhaustive-max":
        posterior = core.teacher_posterior(learner, theta, space, threads=threads)
        choice = core.select_max(posterior)
        idx = posterior.support.index(choice)
        meta = {
            "posterior_probability": float(posterior.probabilities()[idx]),
            "log_weight": float(posterior.log_weights[idx]),
            "support_size": len(posterior),
        }
        return StrategyResult(choice, strategy, meta)

    if strategy == "greedy":
        if not isinstance(space, SubsetSpace):
            raise StrategySpaceMismatch("greedy selection needs a subset space")
        return _greedy_subsets(learner, theta, space)

    if strategy == "mh-sample":
        n = int(options.get("n", 10000))
        burn_in = int(options.get("burn_in", 1000))
        samples = core.mh_sample(learner, theta, space, n, burn_in, seed)
        counts = Counter(s.key() for s in samples)
        mode_key, mode_count = max(counts.items(), key=lambda kv: kv[1])
        meta = {
            "n": n,
            "burn_in": burn_in,
            "distinct_states": len(counts),
            "mode_frequency": mode_count / len(samples),
        }
        return StrategyResult(samples[-1], strategy, meta, samples=tuple(samples))

    if strategy == "mc-expectation":
        if not isinstance(space, MaskSpace):
            raise StrategySpaceMismatch("mc-expectation needs a mask space")
        n = int(options.get("n", 4000))
        rng = np.random.default_rng(seed)
        draws = [space.initial_state(rng) for _ in range(n)]
        masks = np.array([d.payload for d in draws], dtype=float)
        weights = np.array(
            [math.exp(learner.log_likelihood(theta, d)) for d in draws]
        )
        values, stderr = weighted_mean_and_stderr(masks, weights)
        meta = {"n": n, "weight_total": float(weights.sum())}
        return StrategyResult(
            Explanation(ExplanationKind.SALIENCY_VECTOR, values),
            strategy,
            meta,
            stderr=stderr,
        )

    raise BadSpec(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def _greedy_subsets(learner: LearnerModel, theta: TargetInference, space: SubsetSpace) -> StrategyResult:
    """Fill per-class quotas one row at a time, each time adding the row
    whose partial subset the learner scores highest; ties keep the lowest
    index. Exact when the objective is separable across rows; requires a
    learner that can score partial subsets."""
    pools, quotas = space._pools, space._ks
    chosen: list[list[int]] = [[] for _ in pools]
    trace: list[float] = []
    for c, (pool, quota) in enumerate(zip(pools, quotas)):
        for _ in range(quota):
            best, best_score = None, -math.inf
            for cand in pool:
                if cand in chosen[c]:
                    continue
                trial = [sorted(seg) for seg in chosen]
                trial[c] = sorted(trial[c] + [cand])
                partial = example_set(itertools.chain.from_iterable(trial))
                score = learner.log_likelihood(theta, partial)
                # best is None keeps the lowest index when every
                # candidate is scoreless (-inf), e.g. before the subset
                # reaches a class the learner insists on
                if best is None or score > best_score:
                    best, best_score = cand, score
            chosen[c].append(best)
            chosen[c].sort()
            trace.append(best_score)
    final = example_set(itertools.chain.from_iterable(chosen))
    meta = {"score_trace": trace, "log_likelihood": trace[-1]}
    return StrategyResult(final, "greedy", meta)
