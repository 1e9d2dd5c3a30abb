"""Knowledge distillation on clean data only.

The student is trained to match the teacher's temperature-softened class
distribution (temperature 4, cross-entropy on soft targets). The distillation
images are never poisoned or triggered; scenario S4 additionally removes every
image of the target class to emulate a task that lacks it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .config import ExperimentConfig, Scenario
from .tensordump import TensorDump, read_dump
from .train import _batches, _seed_everything, check_data_matches, load_artifact
from .models import build_model

TEMPERATURE = 4.0


def scenario_student_model(scenario: Scenario, teacher_model: str) -> str:
    if scenario is Scenario.S2:
        return "small-conv" if teacher_model == "small-residual-net" else "small-residual-net"
    return teacher_model


def scenario_data(scenario: Scenario, data: TensorDump, target_label: int) -> TensorDump:
    if scenario is Scenario.S4:
        keep = data.labels != target_label
        return TensorDump(
            data.images[keep], data.labels[keep], data.num_classes, data.domain,
            data.mu, data.sigma, data.stats_domain,
        )
    return data


def distill(
    teacher_dir,
    cfg: ExperimentConfig,
    out_dir,
    scenario: Scenario,
    target_label: int = 0,
    data: TensorDump | None = None,
) -> Path:
    """Train a student against a teacher artifact; returns the student artifact."""
    teacher, meta = load_artifact(teacher_dir)
    if data is None:
        data = read_dump(cfg.train_path)
    data = scenario_data(scenario, data, target_label)
    if len(data) == 0:
        raise ValueError("empty distillation dataset")
    check_data_matches(meta, data)
    _seed_everything(cfg.seed)
    student_kind = scenario_student_model(scenario, meta["model"])
    student = build_model(
        student_kind, meta["num_classes"], data.image_shape[0], cfg.width
    )
    optimizer = torch.optim.SGD(
        student.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum
    )
    generator = torch.Generator().manual_seed(cfg.seed)
    images = torch.from_numpy(data.images)
    labels = torch.from_numpy(data.labels)
    log = []
    final_loss = float("nan")
    student.train()
    for epoch in range(cfg.epochs):
        total = 0.0
        for x, _ in _batches(images, labels, cfg.batch_size, generator, cfg.hflip):
            with torch.no_grad():
                soft_targets = F.softmax(teacher(x) / TEMPERATURE, dim=1)
            optimizer.zero_grad()
            log_probs = F.log_softmax(student(x) / TEMPERATURE, dim=1)
            loss = -(soft_targets * log_probs).sum(1).mean() * TEMPERATURE**2
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(x)
        final_loss = total / len(images)
        log.append({"epoch": epoch, "distill_loss": final_loss})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(student.state_dict(), out / "model.pt")
    import json
    from dataclasses import asdict

    (out / "meta.json").write_text(
        json.dumps(
            {
                "model": student_kind,
                "width": cfg.width,
                "num_classes": meta["num_classes"],
                "input_shape": meta["input_shape"],
                "final_loss": final_loss,
                "teacher": str(teacher_dir),
                "scenario": scenario.value,
                "temperature": TEMPERATURE,
                "config": {
                    k: (v.value if hasattr(v, "value") else v)
                    for k, v in asdict(cfg).items()
                },
            },
            indent=2,
        )
        + "\n"
    )
    (out / "log.json").write_text(json.dumps(log, indent=2) + "\n")
    return out
