"""Experiment configuration and the distillation scenario table."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Scenario(enum.Enum):
    """Distillation scenarios.

    S1: same student model and same dataset as the teacher.
    S2: different student model, same dataset.
    S3: same student model, different dataset.
    S4: same student model, dataset with the target class removed.
    """

    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


@dataclass
class ExperimentConfig:
    model: str = "small-residual-net"
    epochs: int = 15
    learning_rate: float = 0.01  # plain SGD at 0.01; momentum is an assumption
    momentum: float = 0.9
    batch_size: int = 128
    width: int = 16
    seed: int = 0
    hflip: bool = True  # train-time horizontal flips; the statistic is flip-invariant
    train_path: str = ""
    distill_scenario: Scenario | None = None

    assumptions: tuple[str, ...] = field(
        default=(
            "momentum 0.9 with plain SGD (unspecified upstream)",
            "distillation loss: temperature-4 softened cross-entropy on teacher logits",
        )
    )
