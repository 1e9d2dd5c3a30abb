"""Audit manifest for poisoning runs: what changed, per dataset index."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class PlanAction(enum.Enum):
    LABEL_FLIPPED = "label_flipped"
    IMAGE_TRANSFORMED = "image_transformed"
    PGD_PERTURBED = "pgd_perturbed"
    UNTOUCHED = "untouched"


@dataclass(frozen=True)
class PlanEntry:
    index: int
    action: PlanAction
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PoisonPlan:
    """Per-index record of a poisoning pass plus the threshold and config used.

    Entries cover every dataset index exactly once, in order.
    """

    entries: tuple[PlanEntry, ...]
    threshold_used: float
    config_snapshot: dict

    def __post_init__(self):
        indices = [e.index for e in self.entries]
        if indices != list(range(len(indices))):
            raise ValueError("plan entries must cover every index exactly once, in order")
        if not math.isfinite(self.threshold_used):
            raise ValueError("threshold_used must be finite")

    def count(self, action: PlanAction) -> int:
        return sum(1 for e in self.entries if e.action is action)

    def indices(self, action: PlanAction) -> list[int]:
        return [e.index for e in self.entries if e.action is action]

    def to_dict(self) -> dict:
        return {
            "threshold_used": self.threshold_used,
            "config": self.config_snapshot,
            "entries": [
                {"index": e.index, "action": e.action.value, "detail": e.detail}
                for e in self.entries
            ],
        }

    @staticmethod
    def from_dict(record: dict) -> "PoisonPlan":
        entries = tuple(
            PlanEntry(e["index"], PlanAction(e["action"]), e.get("detail", {}))
            for e in record["entries"]
        )
        return PoisonPlan(entries, record["threshold_used"], record["config"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @staticmethod
    def load(path: str | Path) -> "PoisonPlan":
        return PoisonPlan.from_dict(json.loads(Path(path).read_text()))
