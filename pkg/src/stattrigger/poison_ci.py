"""Clean-image poisoning: flip labels of the high-statistic tail, touch no pixel.

The threshold is the top-``poison_ratio`` cut of the training statistics; every
image at or above it gets the target label, including images that already
carry it (they count inside the poison budget).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateThreshold, EmptyDataset
from .features import StatFeatureConfig, stat_values, threshold_from_ratio
from .plan import PlanAction, PlanEntry, PoisonPlan
from .tensor import LabeledDataset

DEFAULT_POISON_RATIO = 0.01


@dataclass(frozen=True)
class CiPoisonConfig:
    target_label: int
    poison_ratio: float = DEFAULT_POISON_RATIO
    feature: StatFeatureConfig = field(default_factory=StatFeatureConfig)

    def __post_init__(self):
        if not 0.0 < self.poison_ratio < 1.0:
            raise ValueError("poison_ratio must lie in (0, 1)")
        if self.target_label < 0:
            raise ValueError("target_label must be a class index")


def poison_clean_image(
    ds: LabeledDataset, cfg: CiPoisonConfig
) -> tuple[LabeledDataset, PoisonPlan]:
    """Label-only poisoning pass. Deterministic; images are shared, not copied.

    Raises :class:`DegenerateThreshold` when every statistic value is identical
    (the cut would flip the whole dataset instead of the requested ratio) and
    :class:`EmptyDataset` on empty input.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot poison an empty dataset")
    if cfg.target_label >= ds.num_classes:
        raise ValueError("target_label must be < num_classes")
    values = stat_values(ds.images, cfg.feature)
    if len(ds) > 1 and float(values.min()) == float(values.max()):
        raise DegenerateThreshold(
            "all statistic values are identical; a ratio cut would poison "
            f"the whole dataset instead of {cfg.poison_ratio:.2%}"
        )
    th = threshold_from_ratio(ds, cfg.feature, cfg.poison_ratio)
    flip = values >= th
    labels = ds.labels.copy()
    labels[flip] = cfg.target_label
    entries = []
    for i in range(len(ds)):
        if flip[i]:
            entries.append(
                PlanEntry(
                    i,
                    PlanAction.LABEL_FLIPPED,
                    {
                        "stat_value": float(values[i]),
                        "old_label": int(ds.labels[i]),
                        "new_label": cfg.target_label,
                    },
                )
            )
        else:
            entries.append(PlanEntry(i, PlanAction.UNTOUCHED, {}))
    plan = PoisonPlan(
        tuple(entries),
        threshold_used=th,
        config_snapshot={
            "attack": "clean-image",
            "target_label": cfg.target_label,
            "poison_ratio": cfg.poison_ratio,
            "amplification": cfg.feature.amplification,
            "variant": cfg.feature.variant.value,
        },
    )
    return ds.with_labels(labels), plan
