"""Recombination: build new explanation methods from validated parts.

Compatibility encodes exactly two rules. A parameter-level inference
target can only be taught through the learner that shares its parametric
form (latent class means need the PLDA-shaped learner fitting example
sets). Generalization-level targets, which describe input-output
behaviour, pair with any explanation kind a learner can consume.
A third, mechanical check rejects strategies that cannot operate on the
chosen explanation kind at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import teacher
from .errors import BadSpec, IncompatibleCombination, StrategySpaceMismatch
from .explainers import (
    SaliencyReport,
    distill_tree,
    explain_by_examples,
    lime_local,
    _jsonable,
)
from .learners import (
    KernelConfig,
    make_masked_prediction_learner,
    make_mmd_learner,
    make_nearest_class_learner,
    make_plda_learner,
    surrogate_fit_loss,
)
from .models import Dataset, TargetModel, batch_predictor
from .spaces import MaskSpace, SubsetSpace
from .types import (
    Explanation,
    ExplanationKind,
    TargetInference,
    ThetaKind,
)


@dataclass(frozen=True)
class LearnerSpec:
    theta_kinds: frozenset
    explanation_kinds: frozenset
    parametric_form: str | None = None
    # greedy grows subsets one row at a time, so it needs a learner that
    # can score class-incomplete example sets
    partial_subsets: bool = True


LEARNER_REGISTRY: dict[str, LearnerSpec] = {
    "plda": LearnerSpec(
        frozenset({ThetaKind.LATENT_CLASS_MEANS}),
        frozenset({ExplanationKind.EXAMPLE_SET}),
        parametric_form="plda",
        partial_subsets=False,
    ),
    "masked-prediction": LearnerSpec(
        frozenset({ThetaKind.PREDICTED_LABEL}),
        frozenset({ExplanationKind.FEATURE_MASK}),
    ),
    "nearest-class": LearnerSpec(
        frozenset({ThetaKind.PREDICTED_LABEL}),
        frozenset({ExplanationKind.EXAMPLE_SET}),
    ),
    "mmd": LearnerSpec(
        frozenset({ThetaKind.CLASS_DATA_DISTRIBUTION}),
        frozenset({ExplanationKind.EXAMPLE_SET}),
    ),
    "surrogate-fit": LearnerSpec(
        frozenset({ThetaKind.LOCAL_DECISION_BOUNDARY, ThetaKind.PREDICTIVE_DISTRIBUTION}),
        frozenset({ExplanationKind.LINEAR_WEIGHTS, ExplanationKind.SOFT_TREE}),
    ),
}

_STRATEGY_NEEDS = {
    "exhaustive-max": {ExplanationKind.EXAMPLE_SET, ExplanationKind.FEATURE_MASK},
    "mh-sample": {ExplanationKind.EXAMPLE_SET, ExplanationKind.FEATURE_MASK},
    "greedy": {ExplanationKind.EXAMPLE_SET},
    "mc-expectation": {ExplanationKind.FEATURE_MASK},
    "gradient-fit": {ExplanationKind.LINEAR_WEIGHTS, ExplanationKind.SOFT_TREE},
}


def check_compatibility(theta_kind: ThetaKind, explanation_kind: ExplanationKind, learner_id: str) -> None:
    """Raise IncompatibleCombination naming the violated rule."""
    if learner_id not in LEARNER_REGISTRY:
        raise BadSpec(f"unknown learner {learner_id!r}; choose from {sorted(LEARNER_REGISTRY)}")
    spec = LEARNER_REGISTRY[learner_id]
    if not theta_kind.is_generalization_level:
        if spec.parametric_form != "plda" or explanation_kind is not ExplanationKind.EXAMPLE_SET:
            raise IncompatibleCombination(
                f"{theta_kind.value} is a parameter-level target: it requires a "
                f"learner of the same parametric form fitting example sets, "
                f"not ({explanation_kind.value}, {learner_id})"
            )
    if theta_kind not in spec.theta_kinds:
        raise IncompatibleCombination(
            f"learner {learner_id!r} cannot score {theta_kind.value} targets"
        )
    if explanation_kind not in spec.explanation_kinds:
        raise IncompatibleCombination(
            f"learner {learner_id!r} does not consume {explanation_kind.value} explanations"
        )


@dataclass(frozen=True)
class RecombinedExplainer:
    """A runnable method assembled from (target kind, explanation kind,
    learner, strategy). Construction validates; run executes."""

    theta_kind: ThetaKind
    explanation_kind: ExplanationKind
    learner_id: str
    strategy: str
    params: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "theta_kind": self.theta_kind.value,
            "explanation_kind": self.explanation_kind.value,
            "learner_id": self.learner_id,
            "strategy": self.strategy,
            "params": _jsonable(self.params),
        }

    def run(self, model: TargetModel, data: Dataset, point: np.ndarray | None = None, seed: int = 0, threads: int = 1) -> dict:
        result = self._dispatch(model, data, point, seed, threads)
        return {"combination": self.describe(), "seed": seed, "result": result}

    def _dispatch(self, model, data, point, seed, threads) -> dict:
        p = self.params
        tk, xk, lid = self.theta_kind, self.explanation_kind, self.learner_id

        if tk is ThetaKind.LATENT_CLASS_MEANS:
            strategy = "exhaustive-max" if self.strategy == "exhaustive-max" else "mh"
            report = explain_by_examples(
                model, data, per_class_k=int(p.get("per_class_k", 2)),
                strategy=strategy, seed=seed, threads=threads,
            )
            return report.to_dict()

        if lid == "masked-prediction":
            if point is None:
                raise BadSpec("masked-prediction combinations need a point")
            point = np.asarray(point, dtype=float)
            baseline = p.get("baseline", data.features.mean(axis=0))
            predict = batch_predictor(model)
            label = int(p.get("target_class", np.argmax(predict(point[None, :])[0])))
            learner = make_masked_prediction_learner(model, point, baseline)
            theta = TargetInference(ThetaKind.PREDICTED_LABEL, label)
            space = MaskSpace(point.shape[0], float(p.get("keep_prob", 0.5)))
            options = {"n": int(p.get("n", 4000)), "burn_in": int(p.get("burn_in", 1000))}
            out = teacher.run_strategy(learner, theta, space, self.strategy, seed=seed, threads=threads, **options)
            return _strategy_dict(out)

        if lid == "nearest-class":
            if point is None:
                raise BadSpec("nearest-class combinations need a point")
            point = np.asarray(point, dtype=float)
            predict = batch_predictor(model)
            label = int(p.get("target_class", np.argmax(predict(point[None, :])[0])))
            learner = make_nearest_class_learner(data, point, float(p.get("temperature", 1.0)))
            theta = TargetInference(ThetaKind.PREDICTED_LABEL, label)
            space = SubsetSpace.per_class(data.labels, int(p.get("per_class_k", 1)))
            options = {"n": int(p.get("n", 10000)), "burn_in": int(p.get("burn_in", 1000))}
            out = teacher.run_strategy(learner, theta, space, self.strategy, seed=seed, threads=threads, **options)
            return _strategy_dict(out)

        if lid == "mmd":
            class_index = int(p.get("class_index", 0))
            rows = data.class_rows(class_index)
            if rows.size == 0:
                raise BadSpec(f"class {class_index} has no rows")
            reference = data.features[rows]
            kernel = KernelConfig(bandwidth=p.get("bandwidth"))
            learner = make_mmd_learner(data, kernel, float(p.get("temperature", 1.0)))
            theta = TargetInference(ThetaKind.CLASS_DATA_DISTRIBUTION, (reference, class_index))
            space = SubsetSpace([rows.tolist()], [int(p.get("m", 2))])
            out = teacher.run_strategy(learner, theta, space, self.strategy, seed=seed, threads=threads)
            return _strategy_dict(out)

        if lid == "surrogate-fit":
            if self.strategy != "gradient-fit":
                raise StrategySpaceMismatch(
                    "surrogate spaces are not enumerable; use the gradient-fit strategy"
                )
            return self._fit_surrogate(model, data, point, seed)

        raise BadSpec(f"no runnable recipe for learner {lid!r}")

    def _fit_surrogate(self, model, data, point, seed) -> dict:
        p = self.params
        predict = batch_predictor(model)
        if self.theta_kind is ThetaKind.PREDICTIVE_DISTRIBUTION:
            if self.explanation_kind is not ExplanationKind.SOFT_TREE:
                raise IncompatibleCombination(
                    "matching a full predictive distribution needs a distribution-valued surrogate"
                )
            report = distill_tree(
                model, data.features,
                depth=int(p.get("depth", 3)), beta=float(p.get("beta", 0.0)),
                seed=seed, epochs=int(p.get("epochs", 800)),
                learning_rate=float(p.get("learning_rate", 0.05)),
            )
            return report.to_dict()

        # Local decision boundary: probes around the point, rbf weighted.
        if point is None:
            raise BadSpec("local boundary surrogates need a point")
        point = np.asarray(point, dtype=float)
        width = float(p.get("kernel_width", 1.0))
        count = int(p.get("probe_count", 2000))
        target_class = int(p.get("target_class", 1))
        if self.explanation_kind is ExplanationKind.LINEAR_WEIGHTS:
            report = lime_local(
                model, point, probe_count=count, kernel_width=width,
                ridge=float(p.get("ridge", 1e-3)), seed=seed, target_class=target_class,
            )
            return report.to_dict()

        rng = np.random.default_rng(seed)
        probes = point + width * rng.standard_normal((count, point.shape[0]))
        probs = predict(probes)
        weights = np.exp(-((probes - point) ** 2).sum(axis=1) / (2.0 * width**2))
        tree_report = distill_tree(
            lambda X: _pair_predict(predict, X, target_class),
            probes,
            depth=int(p.get("depth", 3)), beta=float(p.get("beta", 0.0)),
            seed=seed, epochs=int(p.get("epochs", 600)),
            learning_rate=float(p.get("learning_rate", 0.05)),
            sample_weights=weights,
        )
        surrogate = Explanation(ExplanationKind.SOFT_TREE, tree_report.tree)
        loss = surrogate_fit_loss(
            surrogate, probs[:, target_class], probes, weights, ThetaKind.LOCAL_DECISION_BOUNDARY
        )
        out = tree_report.to_dict()
        out["boundary_fit_loss"] = loss
        out["target_class"] = target_class
        return out


def _pair_predict(predict, X, target_class):
    probs = predict(X)
    return np.column_stack([1.0 - probs[:, target_class], probs[:, target_class]])


def _strategy_dict(result: teacher.StrategyResult) -> dict:
    out = {"strategy": result.strategy, "metadata": _jsonable(result.metadata)}
    payload = result.explanation.payload
    if result.explanation.kind is ExplanationKind.EXAMPLE_SET:
        out["indices"] = list(payload)
    elif result.explanation.kind is ExplanationKind.FEATURE_MASK:
        out["mask"] = np.asarray(payload).astype(int).tolist()
    elif result.explanation.kind is ExplanationKind.SALIENCY_VECTOR:
        out["values"] = np.asarray(payload).tolist()
        if result.stderr is not None:
            out["stderr"] = result.stderr.tolist()
    return out


def recombine(
    theta_kind: ThetaKind,
    explanation_kind: ExplanationKind,
    learner_id: str,
    strategy: str,
    params: dict | None = None,
) -> RecombinedExplainer:
    """Validate the combination and return a runnable explainer."""
    check_compatibility(theta_kind, explanation_kind, learner_id)
    if strategy not in _STRATEGY_NEEDS:
        raise BadSpec(f"unknown strategy {strategy!r}; choose from {sorted(_STRATEGY_NEEDS)}")
    if explanation_kind not in _STRATEGY_NEEDS[strategy]:
        raise StrategySpaceMismatch(
            f"strategy {strategy!r} cannot search {explanation_kind.value} explanations"
        )
    if strategy == "greedy" and not LEARNER_REGISTRY[learner_id].partial_subsets:
        raise StrategySpaceMismatch(
            f"greedy grows subsets row by row, but learner {learner_id!r} "
            f"only scores class-complete example sets"
        )
    return RecombinedExplainer(theta_kind, explanation_kind, learner_id, strategy, dict(params or {}))
