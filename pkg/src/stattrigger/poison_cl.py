"""Clean-label poisoning: reshape image statistics, never touch a label.

Non-target images above the statistic threshold get suppressed below it.
Target-label images are perturbed by an untargeted sign-gradient attack against
the clean classifier, then power-stretched to raise their statistic; a
candidate enters the poison set (and consumes budget) only if it both clears
the threshold and is misclassified by the oracle. Candidates failing either
check are left untouched, matching a single-pass, no-retry loop.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .activation import ActivationParams, Direction, power_stretch, suppress_below_threshold
from .errors import BudgetUnmet, SuppressionFailed, WrongDomain
from .features import StatFeatureConfig, stat_value, stat_values
from .oracle import ClassifierOracle
from .plan import PlanAction, PlanEntry, PoisonPlan
from .tensor import Domain, ImageTensor, LabeledDataset

DEFAULT_PGD_STEPS = 15
DEFAULT_PGD_STEP_SIZE = 0.01
ATTEMPT_CHUNK = 256  # oracle batching unit for the target branch


class PerturbationNorm(enum.Enum):
    LINF = "linf"


@dataclass(frozen=True)
class PgdParams:
    """Untargeted sign-gradient ascent under an L-infinity budget.

    ``epsilon`` is expressed in the dataset's pixel units; ``None`` lets the
    poisoning pass derive the conventional 8/255 byte budget from the stored
    standardization statistics.
    """

    steps: int = DEFAULT_PGD_STEPS
    step_size: float = DEFAULT_PGD_STEP_SIZE
    epsilon: Optional[float] = None
    norm: PerturbationNorm = PerturbationNorm.LINF

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("steps must be > 0")
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def default_epsilon(ds: LabeledDataset) -> float:
    """8/255 of the original byte range, rescaled into standardized units."""
    stats = ds.std_stats
    if stats is None:
        raise ValueError(
            "dataset has no standardization statistics; pass an explicit epsilon"
        )
    if stats.source_domain is Domain.RAW_BYTE:
        return 8.0 / stats.sigma
    if stats.source_domain is Domain.UNIT:
        return (8.0 / 255.0) / stats.sigma
    raise ValueError("cannot derive a byte-scale epsilon; pass one explicitly")


def pgd_batch(
    images: np.ndarray,
    labels: np.ndarray,
    p: PgdParams,
    oracle: ClassifierOracle,
    box: Optional[tuple[float, float]] = None,
) -> np.ndarray:
    """Sign-gradient ascent on each image's own loss, projected after every step.

    The perturbation never exceeds ``epsilon`` per pixel; with a bounded value
    domain the iterate is additionally clamped into it. Deterministic given a
    deterministic oracle (no random start).
    """
    if p.epsilon is None:
        raise ValueError("epsilon must be resolved before running the attack")
    origin = images.astype(np.float64)
    eps = p.epsilon
    delta = np.zeros_like(origin)
    for _ in range(p.steps):
        grads = oracle.grad_loss_input(origin + delta, labels)
        delta = np.clip(delta + p.step_size * np.sign(grads), -eps, eps)
        if box is not None:
            delta = np.clip(origin + delta, box[0], box[1]) - origin
    out = origin + delta
    # rounding in origin + delta can spill a fraction of an ulp past the ball;
    # pull those entries a hair inside so max|out - origin| <= eps holds exactly
    spill = np.abs(out - origin) > eps
    if np.any(spill):
        shrunk = np.sign(delta[spill]) * eps * (1.0 - 2.0**-40)
        out[spill] = origin[spill] + shrunk
    return out


def untargeted_pgd(
    img: ImageTensor, label: int, p: PgdParams, oracle: ClassifierOracle
) -> ImageTensor:
    """Single-image convenience wrapper around :func:`pgd_batch`."""
    box = img.domain.bounds
    out = pgd_batch(img.pixels[None], np.array([label]), p, oracle, box=box)
    if box is not None:
        out = np.clip(out, box[0], box[1])  # exact; only moves toward the origin
    return ImageTensor(out[0], img.domain)


@dataclass(frozen=True)
class ClPoisonConfig:
    """Clean-label attack configuration; defaults follow the 32x32 recipe:
    target class 0, budget 250, threshold 160, suppression (0.7, 1),
    boost (2.5, 0.5)."""

    target_label: int = 0
    budget: int = 250
    threshold: float = 160.0
    suppress_params: ActivationParams = field(
        default_factory=lambda: ActivationParams(
            gamma=0.7, lam=1.0, direction=Direction.DECREASE
        )
    )
    boost_params: ActivationParams = field(
        default_factory=lambda: ActivationParams(gamma=2.5, lam=0.5)
    )
    pgd: PgdParams = field(default_factory=PgdParams)
    feature: StatFeatureConfig = field(default_factory=StatFeatureConfig)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


def poison_clean_label(
    ds: LabeledDataset, cfg: ClPoisonConfig, oracle: ClassifierOracle
) -> tuple[LabeledDataset, PoisonPlan]:
    """Image-only poisoning pass; labels are returned untouched.

    Emits :class:`BudgetUnmet` as a warning when fewer than ``budget`` target
    candidates qualify; that is a success with a smaller poison set, matching
    the single forward loop that simply runs out of images.
    """
    if ds.domain is not Domain.STANDARDIZED:
        raise WrongDomain("clean-label poisoning expects a standardized dataset")
    if cfg.target_label >= ds.num_classes:
        raise ValueError("target_label must be < num_classes")
    pgd = cfg.pgd
    if pgd.epsilon is None:
        pgd = PgdParams(pgd.steps, pgd.step_size, default_epsilon(ds), pgd.norm)
    th = cfg.threshold
    suppress = ActivationParams(
        gamma=cfg.suppress_params.gamma,
        lam=cfg.suppress_params.lam,
        target_threshold=th,
        direction=Direction.DECREASE,
        max_escalations=cfg.suppress_params.max_escalations,
    )
    values = stat_values(ds.images, cfg.feature)
    images = ds.images.astype(np.float64, copy=True)
    entries: dict[int, PlanEntry] = {}

    # non-target branch: push hot images below the threshold
    for i in np.flatnonzero((ds.labels != cfg.target_label) & (values >= th)):
        i = int(i)
        try:
            out, log = suppress_below_threshold(ds.image(i), suppress, cfg.feature)
        except SuppressionFailed as exc:
            entries[i] = PlanEntry(
                i,
                PlanAction.UNTOUCHED,
                {"reason": "suppression_failed", "escalation": exc.log.to_dict()},
            )
            continue
        images[i] = out.pixels
        entries[i] = PlanEntry(
            i,
            PlanAction.IMAGE_TRANSFORMED,
            {
                "stat_before": float(values[i]),
                "stat_after": float(stat_value(out, cfg.feature)),
                "escalation": log.to_dict(),
            },
        )

    # target branch: perturb, boost, and keep only fully qualified candidates
    candidates = [int(i) for i in np.flatnonzero(ds.labels == cfg.target_label)]
    remaining = cfg.budget
    cursor = 0
    while remaining > 0 and cursor < len(candidates):
        chunk = candidates[cursor : cursor + min(ATTEMPT_CHUNK, len(candidates) - cursor)]
        cursor += len(chunk)
        originals = ds.images[chunk].astype(np.float64)
        chunk_labels = ds.labels[chunk]
        perturbed = pgd_batch(originals, chunk_labels, pgd, oracle)
        boosted = power_stretch(perturbed, cfg.boost_params.gamma, cfg.boost_params.lam)
        boosted_values = stat_values(boosted, cfg.feature)
        predictions = np.argmax(oracle.predict(boosted), axis=-1)
        for j, i in enumerate(chunk):
            qualified = (
                boosted_values[j] >= th and predictions[j] != cfg.target_label
            )
            if qualified and remaining > 0:
                remaining -= 1
                images[i] = boosted[j]
                delta = float(np.max(np.abs(perturbed[j] - originals[j])))
                entries[i] = PlanEntry(
                    i,
                    PlanAction.PGD_PERTURBED,
                    {
                        "pgd_delta_linf": delta,
                        "pgd_steps": pgd.steps,
                        "stat_before": float(values[i]),
                        "stat_after": float(boosted_values[j]),
                        "oracle_prediction": int(predictions[j]),
                    },
                )
            elif i not in entries:
                reason = "budget_exhausted" if remaining == 0 else (
                    "below_threshold" if boosted_values[j] < th else "still_classified_as_target"
                )
                entries[i] = PlanEntry(i, PlanAction.UNTOUCHED, {"reason": reason})

    consumed = cfg.budget - remaining
    if consumed < cfg.budget:
        warnings.warn(
            f"only {consumed} of {cfg.budget} target-label images qualified",
            BudgetUnmet,
            stacklevel=2,
        )

    full_entries = tuple(
        entries.get(i, PlanEntry(i, PlanAction.UNTOUCHED, {})) for i in range(len(ds))
    )
    plan = PoisonPlan(
        full_entries,
        threshold_used=th,
        config_snapshot={
            "attack": "clean-label",
            "target_label": cfg.target_label,
            "budget": cfg.budget,
            "consumed": consumed,
            "threshold": th,
            "suppress": {"gamma": cfg.suppress_params.gamma, "lambda": cfg.suppress_params.lam},
            "boost": {"gamma": cfg.boost_params.gamma, "lambda": cfg.boost_params.lam},
            "pgd": {
                "steps": pgd.steps,
                "step_size": pgd.step_size,
                "epsilon": pgd.epsilon,
            },
            "amplification": cfg.feature.amplification,
            "variant": cfg.feature.variant.value,
            "oracle_note": "oracle assumed trained on the clean dataset",
        },
    )
    poisoned = LabeledDataset(
        images.astype(np.float32), ds.labels, ds.num_classes, ds.domain, ds.std_stats
    )
    return poisoned, plan


def verify_clean_label_plan(
    original: LabeledDataset,
    poisoned: LabeledDataset,
    plan: PoisonPlan,
    cfg: ClPoisonConfig,
    oracle: ClassifierOracle,
) -> list[str]:
    """Independent post-hoc audit; returns human-readable violations (empty = clean).

    Recomputes everything from the two datasets: labels must be identical,
    suppressed images must sit below the threshold, poisoned target images must
    clear it and fool the oracle, untouched images must be bit-identical.
    """
    violations = []
    if not np.array_equal(original.labels, poisoned.labels):
        violations.append("labels changed")
    th = plan.threshold_used
    values = stat_values(poisoned.images, cfg.feature)
    predictions = None
    pgd_indices = plan.indices(PlanAction.PGD_PERTURBED)
    if pgd_indices:
        predictions = np.argmax(oracle.predict(poisoned.images[pgd_indices]), axis=-1)
    for rank, entry in enumerate(plan.entries):
        i = entry.index
        if entry.action is PlanAction.IMAGE_TRANSFORMED:
            if int(original.labels[i]) == cfg.target_label:
                violations.append(f"index {i}: suppressed a target-label image")
            if values[i] >= th:
                violations.append(f"index {i}: suppressed image still >= threshold")
        elif entry.action is PlanAction.PGD_PERTURBED:
            if int(original.labels[i]) != cfg.target_label:
                violations.append(f"index {i}: poisoned a non-target image")
            if values[i] < th:
                violations.append(f"index {i}: poisoned image below threshold")
        elif entry.action is PlanAction.UNTOUCHED:
            if not np.array_equal(original.images[i], poisoned.images[i]):
                violations.append(f"index {i}: untouched image was modified")
        else:
            violations.append(f"index {i}: unexpected action {entry.action}")
    if pgd_indices:
        for rank, i in enumerate(pgd_indices):
            if int(predictions[rank]) == cfg.target_label:
                violations.append(f"index {i}: oracle still predicts the target label")
    return violations
