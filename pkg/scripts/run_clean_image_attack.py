"""Produce every artifact of a label-only poisoning experiment as files.

Outputs, under --out: clean and poisoned standardized train dumps, a clean
standardized test dump, a triggered test dump, the poisoning plan, and
manifests. The training harness consumes exactly these files.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from stattrigger.activation import ActivationParams, activate_to_threshold
from stattrigger.corpus import reference_corpus
from stattrigger.errors import ActivationFailed
from stattrigger.features import StatFeatureConfig
from stattrigger.io import DatasetFormat, export_dataset
from stattrigger.poison_ci import CiPoisonConfig, poison_clean_image
from stattrigger.tensor import Domain, LabeledDataset, standardize


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="attack_artifacts")
    parser.add_argument("--target", type=int, default=0)
    parser.add_argument("--ratio", type=float, default=0.01)
    parser.add_argument("--gamma", type=float, default=6.0)
    parser.add_argument("--lam", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test, desc = reference_corpus(seed=args.seed)
    std_train = standardize(train)
    stats = std_train.std_stats
    std_test = LabeledDataset(
        ((test.images - stats.mu) / stats.sigma).astype("float32"),
        test.labels, test.num_classes, Domain.STANDARDIZED, stats,
    )

    cfg = StatFeatureConfig()
    poisoned, plan = poison_clean_image(
        std_train, CiPoisonConfig(target_label=args.target, poison_ratio=args.ratio, feature=cfg)
    )

    th = plan.threshold_used
    params = ActivationParams(gamma=args.gamma, lam=args.lam, target_threshold=th)
    triggered_pixels = np.empty_like(std_test.images)
    activated = 0
    for i in range(len(std_test)):
        try:
            img, _ = activate_to_threshold(std_test.image(i), params, cfg)
            triggered_pixels[i] = img.pixels
            activated += 1
        except ActivationFailed:
            triggered_pixels[i] = std_test.images[i]
    triggered = LabeledDataset(
        triggered_pixels, std_test.labels, std_test.num_classes,
        Domain.STANDARDIZED, stats,
    )

    export_dataset(std_train, DatasetFormat.RAW_TENSOR_DUMP, out / "train_clean.rtd")
    export_dataset(poisoned, DatasetFormat.RAW_TENSOR_DUMP, out / "train_poisoned.rtd", plan)
    export_dataset(std_test, DatasetFormat.RAW_TENSOR_DUMP, out / "test_clean.rtd")
    export_dataset(triggered, DatasetFormat.RAW_TENSOR_DUMP, out / "test_triggered.rtd")

    summary = {
        "corpus": desc,
        "train": len(std_train),
        "test": len(std_test),
        "threshold": th,
        "flipped": sum(1 for e in plan.entries if e.action.value == "label_flipped"),
        "activated_test_images": activated,
        "out": str(out),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
