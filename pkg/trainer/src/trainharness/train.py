"""Training loop and model artifacts.

An artifact is a directory with ``model.pt`` (state dict), ``meta.json``
(architecture, data shape, config, final loss), and ``log.json`` (per-epoch
loss/accuracy). Runs are deterministic for a fixed seed and thread count.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .config import ExperimentConfig
from .models import build_model
from .tensordump import TensorDump, read_dump


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)


def _batches(images, labels, batch_size, generator, hflip):
    order = torch.randperm(len(images), generator=generator)
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        if len(idx) < 2:  # batch norm needs more than one sample
            continue
        x = images[idx]
        if hflip:
            flip = torch.rand(len(idx), generator=generator) < 0.5
            x = x.clone()
            x[flip] = torch.flip(x[flip], dims=[-1])
        yield x, labels[idx]


def train(cfg: ExperimentConfig, out_dir, data: TensorDump | None = None) -> Path:
    """Train a classifier on a tensor dump; returns the artifact directory."""
    if data is None:
        data = read_dump(cfg.train_path)
    if len(data) == 0:
        raise ValueError("empty dataset")
    if len(data) < 2:
        raise ValueError("need at least 2 images to train")
    _seed_everything(cfg.seed)
    images = torch.from_numpy(data.images)
    labels = torch.from_numpy(data.labels)
    c = data.image_shape[0]
    model = build_model(cfg.model, data.num_classes, c, cfg.width)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum
    )
    generator = torch.Generator().manual_seed(cfg.seed)
    log = []
    final_loss = float("nan")
    model.train()
    for epoch in range(cfg.epochs):
        total_loss = 0.0
        correct = 0
        for x, y in _batches(images, labels, cfg.batch_size, generator, cfg.hflip):
            optimizer.zero_grad()
            logits = model(x)
            loss = F.cross_entropy(logits, y)
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(x)
            correct += int((logits.argmax(1) == y).sum())
        final_loss = total_loss / len(images)
        log.append(
            {"epoch": epoch, "loss": final_loss, "train_acc": correct / len(images)}
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / "model.pt")
    meta = {
        "model": cfg.model,
        "width": cfg.width,
        "num_classes": data.num_classes,
        "input_shape": list(data.image_shape),
        "final_loss": final_loss,
        "config": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(cfg).items()},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (out / "log.json").write_text(json.dumps(log, indent=2) + "\n")
    return out


def load_artifact(artifact_dir) -> tuple[torch.nn.Module, dict]:
    """Rebuild the model from an artifact directory; returns (model, meta)."""
    artifact_dir = Path(artifact_dir)
    meta = json.loads((artifact_dir / "meta.json").read_text())
    model = build_model(
        meta["model"], meta["num_classes"], meta["input_shape"][0], meta["width"]
    )
    state = torch.load(artifact_dir / "model.pt", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, meta


def check_data_matches(meta: dict, data: TensorDump) -> None:
    if list(data.image_shape) != meta["input_shape"]:
        raise ValueError(
            f"data shape {data.image_shape} does not match the model's "
            f"{meta['input_shape']}"
        )
    if data.num_classes and data.num_classes > meta["num_classes"]:
        raise ValueError(
            f"data declares {data.num_classes} classes, model has {meta['num_classes']}"
        )
