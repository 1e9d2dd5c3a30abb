"""Trigger-survival table across the augmentation battery.

Activates test images above the top-1% training threshold, applies each
augmentation, and reports the fraction whose statistic still clears the
threshold. Writes a JSON report next to the printed table.
"""

import argparse
import json
from pathlib import Path

from stattrigger.activation import ActivationParams, activate_to_threshold
from stattrigger.augment import Augmentation
from stattrigger.corpus import reference_corpus
from stattrigger.features import StatFeatureConfig, threshold_from_ratio
from stattrigger.robustness import asr_under_augmentation
from stattrigger.tensor import Domain, LabeledDataset, standardize


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--limit", type=int, default=300, help="test images to trigger")
    parser.add_argument("--ratio", type=float, default=0.01)
    parser.add_argument("--gamma", type=float, default=6.0)
    parser.add_argument("--lam", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", default="robustness_table.json")
    args = parser.parse_args()

    train, test, desc = reference_corpus(seed=args.seed)
    std_train = standardize(train)
    stats = std_train.std_stats
    test_std = LabeledDataset(
        ((test.images - stats.mu) / stats.sigma).astype("float32"),
        test.labels, test.num_classes, Domain.STANDARDIZED, stats,
    )
    cfg = StatFeatureConfig()
    th = threshold_from_ratio(std_train, cfg, args.ratio)
    params = ActivationParams(gamma=args.gamma, lam=args.lam, target_threshold=th)

    triggered = []
    for i in range(min(args.limit, len(test_std))):
        out, _ = activate_to_threshold(test_std.image(i), params, cfg)
        triggered.append(out)

    augs = [
        Augmentation.hflip(),
        Augmentation.vflip(),
        Augmentation.gaussian_noise(1.0, seed=args.seed),
        Augmentation.rotate(45.0),
        Augmentation.affine_mask(0.2, seed=args.seed),
        Augmentation.scale_down_pad(0.75, seed=args.seed),
        Augmentation.median_filter_scale(3, 0.75),
        Augmentation.optical_distort(2.0, seed=args.seed),
        Augmentation.center_crop(0.75),
    ]
    rows = asr_under_augmentation(triggered, augs, cfg, th)

    print(f"corpus: {desc}")
    print(f"threshold (top {args.ratio:.0%} of train): {th:.1f}")
    print(f"{'augmentation':<22}{'survival':>10}")
    for row in rows:
        print(f"{row.augmentation:<22}{row.survival:>9.1%}")
    Path(args.json).write_text(
        json.dumps(
            {
                "corpus": desc,
                "threshold": th,
                "count": len(triggered),
                "rows": [
                    {"augmentation": r.augmentation, "survival": r.survival}
                    for r in rows
                ],
            },
            indent=2,
        )
        + "\n"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
