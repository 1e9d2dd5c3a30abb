"""Clean accuracy and attack success rate, plus the results table writer."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .tensordump import TensorDump


@torch.no_grad()
def predict_labels(model: torch.nn.Module, images: np.ndarray, batch_size: int = 512) -> np.ndarray:
    model.eval()
    out = []
    tensor = torch.from_numpy(images)
    for start in range(0, len(tensor), batch_size):
        logits = model(tensor[start : start + batch_size])
        out.append(logits.argmax(1).numpy())
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def accuracy(model: torch.nn.Module, data: TensorDump) -> float:
    if len(data) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(predict_labels(model, data.images) == data.labels))


def attack_success_rate(
    model: torch.nn.Module, triggered: TensorDump, target_label: int
) -> float:
    """Fraction of triggered images predicted as the target label.

    Images whose true label is already the target are excluded; they cannot
    witness an attack.
    """
    mask = triggered.labels != target_label
    if not np.any(mask):
        raise ValueError("triggered set holds no non-target images")
    preds = predict_labels(model, triggered.images[mask])
    return float(np.mean(preds == target_label))


def evaluate(
    model: torch.nn.Module,
    clean: TensorDump,
    triggered: TensorDump,
    target_label: int,
) -> tuple[float, float]:
    """(clean accuracy, attack success rate)."""
    return accuracy(model, clean), attack_success_rate(model, triggered, target_label)


def write_table(path, title: str, rows: list[dict], columns: list[str]) -> None:
    """Aligned plain-text results table plus the raw values as JSON lines."""
    import json

    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in columns}
    lines = [title, ""]
    lines.append("  ".join(c.ljust(widths[c]) for c in columns))
    lines.append("  ".join("-" * widths[c] for c in columns))
    for r in rows:
        lines.append("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in columns))
    lines.append("")
    for r in rows:
        lines.append(json.dumps(r))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return "" if value is None else str(value)
