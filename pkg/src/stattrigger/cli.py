"""Command-line front end.

Subcommands: stats, audit, poison-ci, poison-cl, activate, augment,
verify-robustness, export. Datasets are read with format sniffing (tensor
dump, binary batches, PNG folder); outputs are tensor dumps plus JSON
manifests, plans, and reports. All randomness derives from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .activation import ActivationParams, Direction, activate_to_threshold
from .augment import Augmentation, apply_augmentation
from .corpus import natural_patches
from .errors import ActivationFailed, StatTriggerError
from .features import (
    StatFeatureConfig,
    Variant,
    distribution_audit,
    stat_values,
    threshold_from_ratio,
)
from .io import DatasetFormat, export_dataset, load_dataset
from .oracle import BuiltinLinearOracle
from .poison_ci import CiPoisonConfig, poison_clean_image
from .poison_cl import ClPoisonConfig, PgdParams, poison_clean_label
from .protocol import resolve_oracle
from .robustness import (
    asr_under_augmentation,
    verify_masking_bound,
    verify_noise_shift,
)
from .tensor import Domain, LabeledDataset, standardize


def _feature_config(args) -> StatFeatureConfig:
    return StatFeatureConfig(
        amplification=args.amplification, variant=Variant(args.variant)
    )


def _load(args, standardize_default=True) -> LabeledDataset:
    ds = load_dataset(args.input)
    wants_std = getattr(args, "standardize", None)
    if wants_std is None:
        wants_std = standardize_default and ds.domain is not Domain.STANDARDIZED
    if wants_std and ds.domain is not Domain.STANDARDIZED:
        ds = standardize(ds)
    return ds


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if getattr(args, "json", None):
        Path(args.json).write_text(text + "\n")
    else:
        print(text)


def _augmentation_from_args(args) -> Augmentation:
    kind = args.aug
    seed = args.seed
    if kind == "hflip":
        return Augmentation.hflip()
    if kind == "vflip":
        return Augmentation.vflip()
    if kind == "center-crop":
        return Augmentation.center_crop(args.fraction)
    if kind == "gaussian-noise":
        return Augmentation.gaussian_noise(args.variance, seed)
    if kind == "rotate":
        return Augmentation.rotate(args.degrees)
    if kind == "affine-mask":
        return Augmentation.affine_mask(args.r, seed)
    if kind == "scale-down-pad":
        return Augmentation.scale_down_pad(args.scale, seed)
    if kind == "median-filter-scale":
        return Augmentation.median_filter_scale(args.kernel, args.scale)
    if kind == "optical-distort":
        return Augmentation.optical_distort(args.strength, seed)
    raise ValueError(f"unknown augmentation {kind!r}")


AUG_CHOICES = (
    "hflip",
    "vflip",
    "center-crop",
    "gaussian-noise",
    "rotate",
    "affine-mask",
    "scale-down-pad",
    "median-filter-scale",
    "optical-distort",
)


def cmd_stats(args) -> int:
    ds = _load(args, standardize_default=False)
    values = stat_values(ds.images, _feature_config(args))
    quantiles = {
        f"p{int(q * 100):02d}": float(np.quantile(values, q))
        for q in (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    }
    _emit(
        args,
        {
            "count": len(ds),
            "domain": ds.domain.value,
            "mean": float(values.mean()),
            "std": float(values.std()),
            "min": float(values.min()),
            "max": float(values.max()),
            **quantiles,
        },
    )
    return 0


def cmd_audit(args) -> int:
    ds = _load(args)
    n = min(args.sample, len(ds))
    report = distribution_audit(
        [ds.image(i) for i in range(n)], _feature_config(args)
    )
    _emit(
        args,
        {
            "sample_count": report.sample_count,
            "degrees_of_freedom": report.degrees_of_freedom,
            "scale": report.scale,
            "ks_statistic": report.ks_statistic,
        },
    )
    return 0


def cmd_poison_ci(args) -> int:
    ds = _load(args, standardize_default=args.variant == Variant.VARIANCE.value)
    cfg = CiPoisonConfig(
        target_label=args.target,
        poison_ratio=args.ratio,
        feature=_feature_config(args),
    )
    poisoned, plan = poison_clean_image(ds, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_dataset(poisoned, DatasetFormat.RAW_TENSOR_DUMP, out / "poisoned.rtd", plan)
    from .plan import PlanAction

    print(
        json.dumps(
            {
                "flipped": plan.count(PlanAction.LABEL_FLIPPED),
                "threshold": plan.threshold_used,
                "out": str(out / "poisoned.rtd"),
            },
            indent=2,
        )
    )
    return 0


def cmd_poison_cl(args) -> int:
    ds = _load(args)
    feature = _feature_config(args)
    cfg = ClPoisonConfig(
        target_label=args.target,
        budget=args.budget,
        threshold=args.threshold,
        suppress_params=ActivationParams(
            gamma=args.gamma1, lam=args.lambda1, direction=Direction.DECREASE
        ),
        boost_params=ActivationParams(gamma=args.gamma2, lam=args.lambda2),
        pgd=PgdParams(
            steps=args.pgd_steps,
            step_size=args.pgd_step_size,
            epsilon=args.pgd_epsilon,
        ),
        feature=feature,
    )
    oracle = resolve_oracle(
        args.oracle,
        builtin_factory=lambda: BuiltinLinearOracle.fit(ds),
    )
    poisoned, plan = poison_clean_label(ds, cfg, oracle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_dataset(poisoned, DatasetFormat.RAW_TENSOR_DUMP, out / "poisoned.rtd", plan)
    from .plan import PlanAction

    print(
        json.dumps(
            {
                "suppressed": plan.count(PlanAction.IMAGE_TRANSFORMED),
                "poisoned_targets": plan.count(PlanAction.PGD_PERTURBED),
                "threshold": plan.threshold_used,
                "out": str(out / "poisoned.rtd"),
            },
            indent=2,
        )
    )
    return 0


def cmd_activate(args) -> int:
    ds = _load(args)
    cfg = _feature_config(args)
    if args.threshold is not None:
        th = args.threshold
    else:
        train = load_dataset(args.train) if args.train else ds
        if train.domain is not Domain.STANDARDIZED:
            train = standardize(train)
        th = threshold_from_ratio(train, cfg, args.threshold_ratio)
    params = ActivationParams(
        gamma=args.gamma,
        lam=args.lam,
        target_threshold=th,
        max_escalations=args.max_escalations,
    )
    images = np.empty_like(ds.images, dtype=np.float32)
    logs = []
    failed = []
    for i in range(len(ds)):
        try:
            out_img, log = activate_to_threshold(ds.image(i), params, cfg)
            images[i] = out_img.pixels
            logs.append({"index": i, **log.to_dict()})
        except ActivationFailed as exc:
            images[i] = ds.images[i]
            failed.append(i)
            logs.append({"index": i, **exc.log.to_dict()})
    triggered = LabeledDataset(
        images, ds.labels, ds.num_classes, Domain.STANDARDIZED, ds.std_stats
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_dataset(triggered, DatasetFormat.RAW_TENSOR_DUMP, out / "triggered.rtd")
    (out / "escalations.json").write_text(
        json.dumps({"threshold": th, "failed_indices": failed, "logs": logs}, indent=2)
        + "\n"
    )
    print(
        json.dumps(
            {
                "threshold": th,
                "activated": len(ds) - len(failed),
                "failed": len(failed),
                "out": str(out / "triggered.rtd"),
            },
            indent=2,
        )
    )
    return 0


def cmd_augment(args) -> int:
    ds = _load(args, standardize_default=False)
    base = _augmentation_from_args(args)

    def one(i: int):
        aug = Augmentation(base.kind, base.params, seed=args.seed + i)
        return apply_augmentation(ds.image(i), aug)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        outputs = list(pool.map(one, range(len(ds))))
    out_domain = outputs[0].domain if outputs else ds.domain
    augmented = LabeledDataset(
        np.stack([o.pixels for o in outputs]).astype(np.float32),
        ds.labels,
        ds.num_classes,
        out_domain,
        ds.std_stats if out_domain is Domain.STANDARDIZED else None,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_dataset(augmented, DatasetFormat.RAW_TENSOR_DUMP, out)
    print(json.dumps({"augmentation": args.aug, "count": len(ds), "out": str(out)}))
    return 0


def cmd_verify_robustness(args) -> int:
    ds = _load(args)
    cfg = _feature_config(args)
    imgs = [ds.image(i) for i in range(min(args.limit, len(ds)))]
    if args.check == "masking":
        report = verify_masking_bound(imgs, args.r, cfg, seed=args.seed)
        _emit(
            args,
            {
                "check": "masking",
                "mask_fraction": report.mask_fraction,
                "slack": report.slack,
                "count": report.count,
                "violations": report.violations,
                "violation_rate": report.violation_rate,
            },
        )
    elif args.check == "noise":
        report = verify_noise_shift(imgs, trials=args.trials, cfg=cfg, seed=args.seed)
        _emit(
            args,
            {
                "check": "noise",
                "trials": report.trials,
                "grayscale_ratio": report.grayscale_ratio,
                "channel_ratio": report.channel_ratio,
            },
        )
    else:  # survival
        th = args.threshold
        if th is None:
            th = threshold_from_ratio(ds, cfg, args.threshold_ratio)
        params = ActivationParams(gamma=args.gamma, lam=args.lam, target_threshold=th)
        triggered = []
        for img in imgs:
            out_img, _ = activate_to_threshold(img, params, cfg)
            triggered.append(out_img)
        aug = _augmentation_from_args(args)
        rows = asr_under_augmentation(triggered, [aug], cfg, th)
        _emit(
            args,
            {
                "check": "survival",
                "threshold": th,
                "rows": [
                    {"augmentation": r.augmentation, "survival": r.survival, "count": r.count}
                    for r in rows
                ],
            },
        )
    return 0


def cmd_export(args) -> int:
    ds = load_dataset(args.input)
    manifest = export_dataset(ds, DatasetFormat(args.format), args.out)
    print(json.dumps({"out": str(args.out), "clamped_pixels": manifest.clamp_count}))
    return 0


def cmd_make_corpus(args) -> int:
    ds = natural_patches(seed=args.seed)
    n_test = len(ds) // 7
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    test = LabeledDataset(ds.images[:n_test], ds.labels[:n_test], ds.num_classes, ds.domain)
    train = LabeledDataset(ds.images[n_test:], ds.labels[n_test:], ds.num_classes, ds.domain)
    export_dataset(train, DatasetFormat.RAW_TENSOR_DUMP, out / "train.rtd")
    export_dataset(test, DatasetFormat.RAW_TENSOR_DUMP, out / "test.rtd")
    print(json.dumps({"train": len(train), "test": len(test), "out": str(out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stattrigger", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for batch maps")
    parser.add_argument(
        "--variant",
        choices=[v.value for v in Variant],
        default=Variant.VARIANCE.value,
        help="statistic variant",
    )
    parser.add_argument(
        "--amplification", type=float, default=100.0, help="statistic amplification factor"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--input", required=True, help="dataset path (dump, batches, or PNG folder)")
        return p

    p = add("stats", cmd_stats, help="per-image statistic summary")
    p.add_argument("--json", help="write the report to this file")

    p = add("audit", cmd_audit, help="goodness-of-fit audit against the scaled chi-square law")
    p.add_argument("--sample", type=int, default=5000)
    p.add_argument("--json", help="write the report to this file")

    p = add("poison-ci", cmd_poison_ci, help="label-only poisoning")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--ratio", type=float, default=0.01)
    p.add_argument("--out", required=True)

    p = add("poison-cl", cmd_poison_cl, help="image-only poisoning")
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--budget", type=int, default=250)
    p.add_argument("--threshold", type=float, default=160.0)
    p.add_argument("--gamma1", type=float, default=0.7)
    p.add_argument("--lambda1", dest="lambda1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=2.5)
    p.add_argument("--lambda2", dest="lambda2", type=float, default=0.5)
    p.add_argument("--pgd-steps", type=int, default=15)
    p.add_argument("--pgd-step-size", type=float, default=0.01)
    p.add_argument("--pgd-epsilon", type=float, default=None)
    p.add_argument("--oracle", default="builtin", help="builtin | tcp:<host:port> | exec:<command>")
    p.add_argument("--out", required=True)

    p = add("activate", cmd_activate, help="raise statistics above the threshold")
    p.add_argument("--gamma", type=float, default=6.0)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--threshold-ratio", type=float, default=0.01)
    p.add_argument("--train", help="dataset that defines the threshold (default: input)")
    p.add_argument("--max-escalations", type=int, default=8)
    p.add_argument("--out", required=True)

    p = add("augment", cmd_augment, help="apply one augmentation to every image")
    p.add_argument("--aug", choices=AUG_CHOICES, required=True)
    p.add_argument("--fraction", type=float, default=0.75)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--degrees", type=float, default=45.0)
    p.add_argument("--r", type=float, default=0.2)
    p.add_argument("--scale", type=float, default=0.75)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--strength", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = add("verify-robustness", cmd_verify_robustness, help="run one robustness check")
    p.add_argument("--check", choices=("masking", "noise", "survival"), required=True)
    p.add_argument("--r", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--limit", type=int, default=1000, help="images to use")
    p.add_argument("--aug", choices=AUG_CHOICES, default="affine-mask")
    p.add_argument("--fraction", type=float, default=0.75)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--degrees", type=float, default=45.0)
    p.add_argument("--scale", type=float, default=0.75)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--strength", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=6.0)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--threshold-ratio", type=float, default=0.01)
    p.add_argument("--json", help="write the report to this file")

    p = add("export", cmd_export, help="convert a dataset between formats")
    p.add_argument("--format", choices=[f.value for f in DatasetFormat], required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("make-corpus", help="build the bundled-photograph patch corpus")
    p.set_defaults(fn=cmd_make_corpus)
    p.add_argument("--out", required=True)

    for name, action in sub.choices.items():
        action.add_argument(
            "--standardize",
            action=argparse.BooleanOptionalAction,
            default=None,
            help="standardize the dataset on load (default: per command)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StatTriggerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
