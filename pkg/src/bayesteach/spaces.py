"""Explanation spaces: the candidate sets the teacher normalizes over.

A space bundles the candidate enumeration, the explanation prior P(x)
(an unnormalized nonnegative weight), and a symmetric proposal kernel so
Markov chain search works on spaces too large to enumerate.

Canonical forms keep equality meaningful: subset payloads are per-class
sorted index tuples concatenated in class order, masks are int8 arrays.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import BadSpec, NotEnumerable
from .types import Explanation, ExplanationKind, example_set, feature_mask

# Spaces larger than this refuse exhaustive enumeration.
MAX_ENUMERATION = 1 << 20


class ExplanationSpace:
    """Interface: deterministic enumeration plus a symmetric proposal."""

    descriptor: str = "abstract"
    kind: ExplanationKind

    @property
    def enumerable(self) -> bool:
        return self.size() <= MAX_ENUMERATION

    def size(self) -> int:
        raise NotImplementedError

    def elements(self) -> Iterator[Explanation]:
        """Yield every candidate exactly once, in a fixed documented order."""
        raise NotImplementedError

    def log_prior(self, x: Explanation) -> float:
        raise NotImplementedError

    def initial_state(self, rng: np.random.Generator) -> Explanation:
        raise NotImplementedError

    def propose(self, x: Explanation, rng: np.random.Generator) -> Explanation:
        """Draw a neighbour. The kernel must satisfy q(a->b) = q(b->a)."""
        raise NotImplementedError

    def _check_enumerable(self) -> None:
        if not self.enumerable:
            raise NotEnumerable(
                f"{self.descriptor}: {self.size()} candidates exceed the "
                f"enumeration limit of {MAX_ENUMERATION}"
            )


class SubsetSpace(ExplanationSpace):
    """All ways to pick a fixed number of dataset rows from each class.

    With a single unlabeled pool this is the plain k-subsets of n space.
    With labels, one subset is chosen per class and the explanation is the
    concatenation in class order; enumeration is the lexicographic product
    of per-class lexicographic combinations. Prior is uniform unless a
    weight function is given.
    """

    kind = ExplanationKind.EXAMPLE_SET

    def __init__(
        self,
        class_indices: Sequence[Sequence[int]],
        per_class_k: Sequence[int],
        prior_fn: Callable[[Explanation], float] | None = None,
    ):
        if len(class_indices) != len(per_class_k):
            raise BadSpec("one subset size required per class pool")
        self._pools = [tuple(sorted(int(i) for i in pool)) for pool in class_indices]
        self._ks = [int(k) for k in per_class_k]
        for pool, k in zip(self._pools, self._ks):
            if k < 1:
                raise BadSpec(f"subset size must be >= 1, got {k}")
            if k > len(pool):
                raise BadSpec(f"cannot pick {k} rows from a pool of {len(pool)}")
            if len(set(pool)) != len(pool):
                raise BadSpec("index pools must not repeat rows")
        self._prior_fn = prior_fn
        sizes = "x".join(f"C({len(p)},{k})" for p, k in zip(self._pools, self._ks))
        self.descriptor = f"example subsets [{sizes}]"

    @classmethod
    def plain(cls, n_rows: int, k: int, prior_fn=None) -> "SubsetSpace":
        return cls([range(n_rows)], [k], prior_fn)

    @classmethod
    def per_class(cls, labels: np.ndarray, per_class_k: Sequence[int] | int, prior_fn=None) -> "SubsetSpace":
        labels = np.asarray(labels)
        classes = sorted(int(c) for c in np.unique(labels))
        pools = [np.flatnonzero(labels == c).tolist() for c in classes]
        if isinstance(per_class_k, int):
            per_class_k = [per_class_k] * len(pools)
        return cls(pools, list(per_class_k), prior_fn)

    def size(self) -> int:
        total = 1
        for pool, k in zip(self._pools, self._ks):
            total *= math.comb(len(pool), k)
        return total

    def elements(self) -> Iterator[Explanation]:
        self._check_enumerable()
        per_class = [itertools.combinations(pool, k) for pool, k in zip(self._pools, self._ks)]
        for combo in itertools.product(*per_class):
            yield example_set(itertools.chain.from_iterable(combo))

    def _segments(self, x: Explanation) -> list[tuple[int, ...]]:
        indices = x.payload
        segments, start = [], 0
        for k in self._ks:
            segments.append(tuple(indices[start : start + k]))
            start += k
        return segments

    def prior_weight(self, x: Explanation) -> float:
        if self._prior_fn is None:
            return 1.0
        weight = self._prior_fn(x)
        if weight < 0:
            raise ValueError("prior weights must be nonnegative")
        return float(weight)

    def log_prior(self, x: Explanation) -> float:
        weight = self.prior_weight(x)
        return math.log(weight) if weight > 0 else -math.inf

    def initial_state(self, rng: np.random.Generator) -> Explanation:
        parts = []
        for pool, k in zip(self._pools, self._ks):
            chosen = rng.choice(len(pool), size=k, replace=False)
            parts.extend(sorted(pool[i] for i in chosen))
        return example_set(parts)

    def propose(self, x: Explanation, rng: np.random.Generator) -> Explanation:
        # Swap one chosen row for one unchosen row of the same class. The
        # class is drawn uniformly, then both endpoints uniformly, so the
        # move and its reverse have identical probability.
        segments = self._segments(x)
        c = int(rng.integers(len(self._pools)))
        pool, seg = self._pools[c], segments[c]
        out = [i for i in pool if i not in seg]
        if not out:
            return x
        drop = seg[int(rng.integers(len(seg)))]
        add = out[int(rng.integers(len(out)))]
        new_seg = tuple(sorted(set(seg) - {drop} | {add}))
        segments[c] = new_seg
        return example_set(itertools.chain.from_iterable(segments))


class MaskSpace(ExplanationSpace):
    """Binary feature masks with an independent Bernoulli keep prior."""

    kind = ExplanationKind.FEATURE_MASK

    def __init__(self, dim: int, keep_prob: float):
        if dim < 1:
            raise BadSpec(f"mask dimension must be >= 1, got {dim}")
        if not 0.0 < keep_prob < 1.0:
            raise BadSpec(f"keep probability must lie in (0, 1), got {keep_prob}")
        self.dim = int(dim)
        self.keep_prob = float(keep_prob)
        self._log_p = math.log(self.keep_prob)
        self._log_q = math.log1p(-self.keep_prob)
        self.descriptor = f"feature masks [2^{dim}, keep_prob={keep_prob}]"

    def size(self) -> int:
        return 1 << self.dim

    def elements(self) -> Iterator[Explanation]:
        self._check_enumerable()
        for bits in itertools.product((0, 1), repeat=self.dim):
            yield feature_mask(bits)

    def prior_weight(self, x: Explanation) -> float:
        ones = int(np.sum(x.payload))
        return self.keep_prob**ones * (1.0 - self.keep_prob) ** (self.dim - ones)

    def log_prior(self, x: Explanation) -> float:
        ones = int(np.sum(x.payload))
        return ones * self._log_p + (self.dim - ones) * self._log_q

    def initial_state(self, rng: np.random.Generator) -> Explanation:
        return feature_mask(rng.random(self.dim) < self.keep_prob)

    def propose(self, x: Explanation, rng: np.random.Generator) -> Explanation:
        bits = np.array(x.payload, copy=True)
        j = int(rng.integers(self.dim))
        bits[j] = 1 - bits[j]
        return feature_mask(bits)


class EnumeratedSpace(ExplanationSpace):
    """An explicit candidate list, optionally with per-candidate weights."""

    def __init__(self, candidates: Sequence[Explanation], prior_weights: Sequence[float] | None = None, descriptor: str = "enumerated"):
        if len(candidates) == 0:
            raise BadSpec("an enumerated space needs at least one candidate")
        self._candidates = tuple(candidates)
        self.kind = self._candidates[0].kind
        if prior_weights is None:
            self._weights = None
            self._log_weights = None
        else:
            weights = np.asarray(prior_weights, dtype=float)
            if weights.shape != (len(self._candidates),) or np.any(weights < 0):
                raise BadSpec("prior weights must be nonnegative, one per candidate")
            self._weights = weights
            with np.errstate(divide="ignore"):
                self._log_weights = np.log(weights)
        self._index = {c.key(): i for i, c in enumerate(self._candidates)}
        self.descriptor = f"{descriptor} [{len(self._candidates)}]"

    def size(self) -> int:
        return len(self._candidates)

    def elements(self) -> Iterator[Explanation]:
        self._check_enumerable()
        return iter(self._candidates)

    def prior_weight(self, x: Explanation) -> float:
        if self._weights is None:
            return 1.0
        return float(self._weights[self._index[x.key()]])

    def log_prior(self, x: Explanation) -> float:
        if self._log_weights is None:
            return 0.0
        return float(self._log_weights[self._index[x.key()]])

    def initial_state(self, rng: np.random.Generator) -> Explanation:
        return self._candidates[int(rng.integers(len(self._candidates)))]

    def propose(self, x: Explanation, rng: np.random.Generator) -> Explanation:
        if len(self._candidates) == 1:
            return x
        here = self._index[x.key()]
        j = int(rng.integers(len(self._candidates) - 1))
        if j >= here:
            j += 1
        return self._candidates[j]
