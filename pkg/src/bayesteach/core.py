"""Posterior machinery for explanation selection.

The teacher treats explanation choice as inference: each candidate x gets
unnormalized weight P_L(theta | x) * P(x), where P_L is the learner's
likelihood of drawing the intended inference from x and P(x) is the
explanation prior. Normalizing over the candidate space yields the
teacher posterior; explanations are picked by maximizing it, sampling it,
or walking it with a Markov chain when the space is too large to sweep.

All weight arithmetic is carried in log space and normalized with
log-sum-exp. Zero total mass raises instead of silently renormalizing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logsumexp

from .errors import AllZeroMass, ZeroStartMass
from .spaces import ExplanationSpace
from .types import Explanation, LearnerModel, TargetInference, TeacherPosterior


def teacher_posterior(
    learner: LearnerModel,
    theta: TargetInference,
    space: ExplanationSpace,
    threads: int = 1,
) -> TeacherPosterior:
    """Normalize likelihood * prior over every positive-prior candidate.

    The support keeps enumeration order, so downstream tie-breaking by
    index is well defined. Evaluation may be spread over a thread pool;
    weights are written back by candidate index, which keeps the result
    independent of scheduling.
    """
    support: list[Explanation] = []
    log_priors: list[float] = []
    for x in space.elements():
        lp = space.log_prior(x)
        if lp > -np.inf:
            support.append(x)
            log_priors.append(lp)
    if not support:
        raise AllZeroMass(f"{space.descriptor}: no candidate has positive prior weight")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            log_liks = list(pool.map(lambda x: learner.log_likelihood(theta, x), support, chunksize=64))
    else:
        log_liks = [learner.log_likelihood(theta, x) for x in support]

    log_weights = np.asarray(log_liks, dtype=float) + np.asarray(log_priors, dtype=float)
    if np.all(np.isneginf(log_weights)):
        raise AllZeroMass(
            f"{space.descriptor}: every candidate has zero likelihood * prior"
        )
    log_z = float(logsumexp(log_weights))
    return TeacherPosterior(tuple(support), log_weights, log_z)


def select_max(posterior: TeacherPosterior) -> Explanation:
    """The maximum-posterior explanation; ties go to the lowest index."""
    return posterior.support[int(np.argmax(posterior.log_weights))]


def sample_posterior(posterior: TeacherPosterior, n: int, seed: int) -> list[Explanation]:
    """Draw n independent explanations from the posterior."""
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(posterior.support), size=n, p=posterior.probabilities())
    return [posterior.support[int(i)] for i in draws]


def mh_sample(
    learner: LearnerModel,
    theta: TargetInference,
    space: ExplanationSpace,
    n: int,
    burn_in: int,
    seed: int,
) -> list[Explanation]:
    """Metropolis walk over the space using its symmetric proposal kernel.

    Acceptance is min(1, w'/w) on the unnormalized weights, valid because
    the proposal is symmetric. The current state is recorded after every
    post-burn-in step, rejections included.
    """
    rng = np.random.default_rng(seed)
    cache: dict[tuple, float] = {}

    def log_weight(x: Explanation) -> float:
        key = x.key()
        if key not in cache:
            lp = space.log_prior(x)
            cache[key] = -np.inf if lp == -np.inf else learner.log_likelihood(theta, x) + lp
        return cache[key]

    state = space.initial_state(rng)
    state_w = log_weight(state)
    if state_w == -np.inf:
        raise ZeroStartMass(f"{space.descriptor}: initial state has zero posterior mass")

    samples: list[Explanation] = []
    for step in range(burn_in + n):
        proposal = space.propose(state, rng)
        prop_w = log_weight(proposal)
        log_alpha = prop_w - state_w
        if log_alpha >= 0 or rng.random() < np.exp(log_alpha):
            state, state_w = proposal, prop_w
        if step >= burn_in:
            samples.append(state)
    return samples
