"""Simulated user studies: the artifact's evaluation layer.

A study confronts a population of simulated learners with two-alternative
forced-choice tasks: shown an explanation, pick which of two candidate
inferences it teaches. Reports carry accuracy, belief shift, and a
calibration table of predicted versus realized accuracy.

fidelity_check compares one learner against a reference on probes that
span the predicted-value range; rank_order_independence asks whether a
score table induces the same ranking of inference targets for every
explanation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import spearmanr

from .core import teacher_posterior, select_max
from .errors import BadSpec, InsufficientCoverage
from .explainers import explain_by_examples, _jsonable
from .learners import BiasConfig, biased_learner, make_plda_learner
from .models import Dataset, TargetModel
from .spaces import SubsetSpace
from .types import Explanation, LearnerModel, TargetInference, ThetaKind, example_set

CALIBRATION_BINS = 10


@dataclass(frozen=True)
class TwoAfcTask:
    """One forced choice: which candidate does explanation x teach?"""

    candidates: tuple[TargetInference, ...]
    target_index: int
    x: Explanation
    trials: int = 1

    def __post_init__(self):
        if len(self.candidates) != 2:
            raise BadSpec("a forced choice needs exactly two candidates")
        if not 0 <= self.target_index < 2:
            raise BadSpec("target_index must be 0 or 1")
        if self.trials < 1:
            raise BadSpec("trials must be >= 1")


@dataclass(frozen=True)
class PopulationMember:
    base_learner: LearnerModel
    weight: float = 1.0
    bias: BiasConfig | None = None

    def learner(self) -> LearnerModel:
        if self.bias is None:
            return self.base_learner
        return biased_learner(self.base_learner, self.bias)

    def prior_on(self, task: TwoAfcTask) -> np.ndarray:
        if self.bias is None:
            return np.full(2, 0.5)
        masses = np.array([math.exp(self.bias.log_prior_of(c)) for c in task.candidates])
        if masses.sum() <= 0:
            return np.full(2, 0.5)
        return masses / masses.sum()


@dataclass(frozen=True)
class SimulatedStudy:
    population: tuple[PopulationMember, ...]
    tasks: tuple[TwoAfcTask, ...]

    def __post_init__(self):
        if not self.population or not self.tasks:
            raise BadSpec("a study needs at least one member and one task")
        if any(m.weight <= 0 for m in self.population):
            raise BadSpec("population weights must be positive")


@dataclass(frozen=True)
class StudyReport:
    overall_accuracy: float
    overall_belief_shift: float
    per_task: tuple[dict, ...]
    calibration: dict
    trial_count: int

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "overall_belief_shift": self.overall_belief_shift,
            "per_task": [_jsonable(t) for t in self.per_task],
            "calibration": _jsonable(self.calibration),
            "trial_count": self.trial_count,
        }


def _choice_outcomes(log_liks: list[float], target: int, trials: int, rng: np.random.Generator) -> float:
    """Fraction of trials picking the target; exact ties flip a fair coin."""
    gap = log_liks[target] - log_liks[1 - target]
    if gap > 0:
        return 1.0
    if gap < 0:
        return 0.0
    return float(np.mean(rng.random(trials) < 0.5))


def simulate_2afc(study: SimulatedStudy, seed: int) -> StudyReport:
    """Run every (member, task) pair; aggregate by population weight.

    The predicted accuracy for a pair is the learner's normalized
    posterior mass on the target candidate; realized accuracy is the
    simulated argmax choice. Randomness is derived per (seed, member,
    task) so results do not depend on iteration order.
    """
    member_w = np.array([m.weight for m in study.population], dtype=float)
    member_w = member_w / member_w.sum()

    per_task: list[dict] = []
    records: list[tuple[float, float, float]] = []  # (weight, predicted, realized)
    total_trials = 0
    for t_idx, task in enumerate(study.tasks):
        total_trials += task.trials
        task_acc = 0.0
        task_pred = 0.0
        task_shift = 0.0
        for m_idx, member in enumerate(study.population):
            learner = member.learner()
            log_liks = [learner.log_likelihood(c, task.x) for c in task.candidates]
            if all(v == -math.inf for v in log_liks):
                predicted = 0.5
            else:
                predicted = float(
                    math.exp(log_liks[task.target_index] - logsumexp(log_liks))
                )
            rng = np.random.default_rng((seed, m_idx, t_idx))
            realized = _choice_outcomes(log_liks, task.target_index, task.trials, rng)
            prior = member.prior_on(task)[task.target_index]
            task_acc += member_w[m_idx] * realized
            task_pred += member_w[m_idx] * predicted
            task_shift += member_w[m_idx] * (predicted - prior)
            records.append((member_w[m_idx] * task.trials, predicted, realized))
        per_task.append(
            {
                "accuracy": task_acc,
                "predicted": task_pred,
                "belief_shift": task_shift,
                "trials": task.trials,
            }
        )

    trials_per_task = np.array([t.trials for t in study.tasks], dtype=float)
    acc = np.array([t["accuracy"] for t in per_task])
    shift = np.array([t["belief_shift"] for t in per_task])
    overall_acc = float(acc @ trials_per_task / trials_per_task.sum())
    overall_shift = float(shift @ trials_per_task / trials_per_task.sum())

    edges = np.linspace(0.0, 1.0, CALIBRATION_BINS + 1)
    pred = np.array([r[1] for r in records])
    real = np.array([r[2] for r in records])
    wts = np.array([r[0] for r in records])
    bins = np.clip((pred * CALIBRATION_BINS).astype(int), 0, CALIBRATION_BINS - 1)
    calibration = {"bin_edges": edges.tolist(), "bins": []}
    for b in range(CALIBRATION_BINS):
        inside = bins == b
        w = float(wts[inside].sum())
        entry = {"count": int(inside.sum()), "weight": w}
        if w > 0:
            entry["predicted_mean"] = float(pred[inside] @ wts[inside] / w)
            entry["realized_mean"] = float(real[inside] @ wts[inside] / w)
        else:
            entry["predicted_mean"] = None
            entry["realized_mean"] = None
        calibration["bins"].append(entry)

    return StudyReport(overall_acc, overall_shift, tuple(per_task), calibration, total_trials)


# ---------------------------------------------------------------------------
# fidelity


@dataclass(frozen=True)
class FidelityProbe:
    """A candidate pair plus explanation; the measured response is the
    normalized posterior mass on the target candidate, a value in [0, 1]."""

    candidates: tuple[TargetInference, ...]
    target_index: int
    x: Explanation


def probe_value(learner: LearnerModel, probe: FidelityProbe) -> float:
    log_liks = [learner.log_likelihood(c, probe.x) for c in probe.candidates]
    if all(v == -math.inf for v in log_liks):
        return 1.0 / len(log_liks)
    return float(math.exp(log_liks[probe.target_index] - logsumexp(log_liks)))


@dataclass(frozen=True)
class FidelityReport:
    correlation: float
    decile_counts: tuple[int, ...]
    decile_mad: tuple[float, ...]
    flagged_deciles: tuple[int, ...]
    learner_values: tuple[float, ...] = field(repr=False)
    reference_values: tuple[float, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "correlation": self.correlation,
            "decile_counts": list(self.decile_counts),
            "decile_mad": list(self.decile_mad),
            "flagged_deciles": list(self.flagged_deciles),
        }


def fidelity_check(
    learner: LearnerModel,
    probes,
    reference: LearnerModel,
    min_per_decile: int = 5,
    mad_threshold: float = 0.1,
) -> FidelityReport:
    """Compare a learner against a reference probe by probe.

    Probes are binned into deciles of the learner's own predicted value;
    each decile needs min_per_decile probes or the probe set cannot
    support a calibration claim and InsufficientCoverage is raised.
    """
    probes = list(probes)
    if not probes:
        raise BadSpec("at least one probe is required")
    mine = np.array([probe_value(learner, p) for p in probes])
    theirs = np.array([probe_value(reference, p) for p in probes])
    deciles = np.clip((mine * 10).astype(int), 0, 9)
    counts = np.bincount(deciles, minlength=10)
    thin = np.flatnonzero(counts < min_per_decile)
    if thin.size:
        raise InsufficientCoverage(
            f"deciles {thin.tolist()} have fewer than {min_per_decile} probes"
        )
    mad = np.array([
        float(np.mean(np.abs(mine[deciles == b] - theirs[deciles == b])))
        for b in range(10)
    ])
    flagged = tuple(int(b) for b in range(10) if mad[b] > mad_threshold)
    if mine.std() == 0.0 or theirs.std() == 0.0:
        corr = 1.0 if np.allclose(mine, theirs) else 0.0
    else:
        corr = float(np.corrcoef(mine, theirs)[0, 1])
    return FidelityReport(
        corr, tuple(int(c) for c in counts), tuple(mad.tolist()), flagged,
        tuple(mine.tolist()), tuple(theirs.tolist()),
    )


def stratified_probe_set(learner: LearnerModel, pool, per_decile: int = 5):
    """Select probes from a pool so every decile of the learner's value
    has per_decile entries. Raises InsufficientCoverage if the pool
    cannot fill some decile."""
    buckets: dict[int, list] = {b: [] for b in range(10)}
    for probe in pool:
        b = min(int(probe_value(learner, probe) * 10), 9)
        if len(buckets[b]) < per_decile:
            buckets[b].append(probe)
    thin = [b for b, items in buckets.items() if len(items) < per_decile]
    if thin:
        raise InsufficientCoverage(
            f"probe pool cannot fill deciles {thin} with {per_decile} probes each"
        )
    return [p for b in range(10) for p in buckets[b]]


# ---------------------------------------------------------------------------
# rank order


@dataclass(frozen=True)
class RankReport:
    independent: bool
    rankings: tuple[tuple[int, ...], ...]
    spearman: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "independent": self.independent,
            "rankings": [list(r) for r in self.rankings],
            "spearman": self.spearman.tolist(),
        }


def rank_order_independence(score_table: np.ndarray) -> RankReport:
    """Rows are inference targets, columns are explanations. Reports the
    per-column ranking of targets (best first) and whether every column
    agrees; disagreement comes with pairwise Spearman correlations."""
    scores = np.asarray(score_table, dtype=float)
    if scores.ndim != 2 or scores.shape[0] < 2 or scores.shape[1] < 1:
        raise BadSpec("the score table needs >= 2 targets and >= 1 explanation")
    rankings = tuple(
        tuple(int(i) for i in np.argsort(-scores[:, j], kind="stable"))
        for j in range(scores.shape[1])
    )
    independent = all(r == rankings[0] for r in rankings)
    if scores.shape[1] == 1:
        spearman = np.ones((1, 1))
    else:
        rho = spearmanr(scores, axis=0).statistic
        spearman = np.atleast_2d(np.asarray(rho, dtype=float))
        if spearman.shape == (1, 1) and scores.shape[1] == 2:
            r = float(spearman[0, 0])
            spearman = np.array([[1.0, r], [r, 1.0]])
    return RankReport(independent, rankings, spearman)


# ---------------------------------------------------------------------------
# named studies


def example_selection_study(
    model: TargetModel,
    data: Dataset,
    per_class_k: int = 2,
    distractor_scale: float = 0.4,
    trials: int = 2000,
    seed: int = 0,
    random_subset_count: int = 1000,
    bias_strength: float = 0.0,
    bias_favors_distractor: bool = True,
    threads: int = 1,
) -> dict:
    """Teacher-selected examples versus random subsets on a 2AFC task.

    The learner must identify the true latent class means against a
    jittered distractor. One arm shows the teacher's argmax subset on
    every trial; the other draws a fresh random subset per trial.
    """
    if model.family != "plda":
        raise BadSpec("the example selection study explains plda models")
    rng = np.random.default_rng((seed, 0xD15))
    true_means = model.parameters["latent_means"]
    distractor = true_means + distractor_scale * rng.standard_normal(true_means.shape)
    candidates = (
        TargetInference(ThetaKind.LATENT_CLASS_MEANS, true_means),
        TargetInference(ThetaKind.LATENT_CLASS_MEANS, distractor),
    )

    base = make_plda_learner(model, data)
    bias = None
    if bias_strength > 0:
        favored = (0.1, 0.9) if bias_favors_distractor else (0.9, 0.1)
        bias = BiasConfig(bias_strength, candidates, np.array(favored))
    member = PopulationMember(base, 1.0, bias)

    selection = explain_by_examples(
        model, data, per_class_k=per_class_k, strategy="exhaustive-max", threads=threads
    )
    selected_x = example_set(selection.indices)

    space = SubsetSpace.per_class(data.labels, per_class_k)
    teacher_task = TwoAfcTask(candidates, 0, selected_x, trials=trials)
    teacher_report = simulate_2afc(SimulatedStudy((member,), (teacher_task,)), seed)

    draw_rng = np.random.default_rng((seed, 0xA11))
    random_tasks = tuple(
        TwoAfcTask(candidates, 0, space.initial_state(draw_rng), trials=1)
        for _ in range(trials)
    )
    random_report = simulate_2afc(SimulatedStudy((member,), random_tasks), seed)

    ll_rng = np.random.default_rng((seed, 0x5EED))
    random_lls = np.array([
        base.log_likelihood(candidates[0], space.initial_state(ll_rng))
        for _ in range(random_subset_count)
    ])
    selected_ll = base.log_likelihood(candidates[0], selected_x)
    percentile_99 = float(np.quantile(random_lls, 0.99))

    return {
        "selected_indices": list(selection.indices),
        "teacher_accuracy": teacher_report.overall_accuracy,
        "random_accuracy": random_report.overall_accuracy,
        "accuracy_gap": teacher_report.overall_accuracy - random_report.overall_accuracy,
        "teacher_belief_shift": teacher_report.overall_belief_shift,
        "random_belief_shift": random_report.overall_belief_shift,
        "selected_log_likelihood": float(selected_ll),
        "random_log_likelihood_p99": percentile_99,
        "beats_random_p99": bool(selected_ll >= percentile_99),
        "distractor_scale": distractor_scale,
        "bias_strength": bias_strength,
        "trials": trials,
        "calibration": teacher_report.calibration,
    }


def bias_sensitivity_study(
    model: TargetModel,
    data: Dataset,
    strengths=(0.0, 5.0, 50.0),
    per_class_k: int = 2,
    distractor_scale: float = 0.4,
    task_count: int = 200,
    seed: int = 0,
) -> dict:
    """Sweep confirmation-bias strength with the prior favoring the
    wrong candidate. Every task is scored once per strength by the same
    member, so accuracy is comparable across the sweep; the final column
    reports mean posterior mass on the favored (wrong) candidate.
    """
    if model.family != "plda":
        raise BadSpec("the bias sweep explains plda models")
    rng = np.random.default_rng((seed, 0xB1A5))
    true_means = model.parameters["latent_means"]
    distractor = true_means + distractor_scale * rng.standard_normal(true_means.shape)
    candidates = (
        TargetInference(ThetaKind.LATENT_CLASS_MEANS, true_means),
        TargetInference(ThetaKind.LATENT_CLASS_MEANS, distractor),
    )
    base = make_plda_learner(model, data)
    space = SubsetSpace.per_class(data.labels, per_class_k)
    draw_rng = np.random.default_rng((seed, 0xA11))
    tasks = tuple(
        TwoAfcTask(candidates, 0, space.initial_state(draw_rng), trials=1)
        for _ in range(task_count)
    )

    rows = []
    for strength in strengths:
        if strength > 0:
            member = PopulationMember(
                base, 1.0, BiasConfig(strength, candidates, np.array([0.1, 0.9]))
            )
        else:
            member = PopulationMember(base, 1.0)
        report = simulate_2afc(SimulatedStudy((member,), tasks), seed)
        favored_mass = 1.0 - float(
            np.mean([t["predicted"] for t in report.per_task])
        )
        rows.append(
            {
                "strength": float(strength),
                "accuracy": report.overall_accuracy,
                "belief_shift": report.overall_belief_shift,
                "favored_candidate_mass": favored_mass,
            }
        )
    accs = [r["accuracy"] for r in rows]
    return {
        "strengths": [float(s) for s in strengths],
        "rows": rows,
        "monotone_non_increasing": all(
            accs[i + 1] <= accs[i] + 1e-12 for i in range(len(accs) - 1)
        ),
    }


def strategy_mismatch_study(
    selector: LearnerModel,
    evaluator: LearnerModel,
    candidates: tuple[TargetInference, ...],
    target_index: int,
    space,
    n: int = 2000,
    burn_in: int = 200,
    seed: int = 0,
) -> dict:
    """Does sampling explanations beat committing to the argmax when the
    explainee differs from the learner model used to select?

    The selector picks (or samples) x for the target candidate; the
    evaluator scores each x by its normalized posterior mass on the
    target. Reported, not a universal claim: the outcome depends on how
    the two learners disagree.
    """
    from .core import mh_sample  # local import keeps module load light

    theta = candidates[target_index]
    posterior = teacher_posterior(selector, theta, space)
    x_max = select_max(posterior)
    samples = mh_sample(selector, theta, space, n=n, burn_in=burn_in, seed=seed)

    def evaluator_mass(x: Explanation) -> float:
        return probe_value(evaluator, FidelityProbe(candidates, target_index, x))

    max_value = evaluator_mass(x_max)
    cache: dict = {}
    total = 0.0
    for x in samples:
        key = x.key()
        if key not in cache:
            cache[key] = evaluator_mass(x)
        total += cache[key]
    sampled_value = total / len(samples)
    return {
        "max_explanation_value": max_value,
        "sampled_mean_value": sampled_value,
        "sampling_beats_max": bool(sampled_value > max_value),
        "sample_count": len(samples),
        "distinct_samples": len(cache),
    }
