"""Deterministic image sources for experiments and verification.

Synthetic generators cover the exactly-analyzable cases (i.i.d. standard-normal
pixels, replicated-channel planes). For natural images the toolkit uses real
CIFAR-10 binaries when a local copy is available, and otherwise falls back to a
reproducible corpus of 32x32 patches harvested from the photographs bundled
with scikit-image (no network access required).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

import numpy as np

from .tensor import Domain, LabeledDataset, StdStats

CIFAR10_ENV_VAR = "STATTRIGGER_CIFAR10_DIR"

# name -> whether the photo is RGB; grayscale sources are replicated to 3 channels
_PATCH_SOURCES = (
    ("astronaut", True),
    ("chelsea", True),
    ("coffee", True),
    ("cat", True),
    ("rocket", True),
    ("immunohistochemistry", True),
    ("retina", True),
    ("camera", False),
    ("grass", False),
    ("coins", False),
)


def _std_stats_for_unit_normal() -> StdStats:
    return StdStats(mu=0.0, sigma=1.0, source_domain=Domain.STANDARDIZED)


def gaussian_images(
    count: int,
    shape: tuple[int, int, int] = (3, 32, 32),
    seed: int = 0,
    replicate_channels: bool = False,
) -> LabeledDataset:
    """Standardized images with standard-normal pixels.

    With ``replicate_channels`` one (h, w) plane is drawn per image and copied
    across channels, mimicking the strong channel correlation of photographs:
    the grayscale grid then has unit variance exactly.
    """
    c, h, w = shape
    rng = np.random.default_rng(seed)
    if replicate_channels:
        planes = rng.standard_normal((count, 1, h, w))
        images = np.repeat(planes, c, axis=1)
    else:
        images = rng.standard_normal((count, c, h, w))
    labels = np.zeros(count, dtype=np.int64)
    return LabeledDataset(
        images.astype(np.float32),
        labels,
        num_classes=1,
        domain=Domain.STANDARDIZED,
        std_stats=_std_stats_for_unit_normal(),
    )


def natural_patches(
    size: int = 32,
    scales: tuple[int, ...] = (1, 2, 3, 4),
    per_class: int = 700,
    min_contrast: float = 16.0,
    min_range: float = 150.0,
    seed: int = 0,
) -> LabeledDataset:
    """Natural RGB patches from scikit-image's bundled photographs.

    One class per source photograph. Windows of ``size * scale`` pixels are
    mean-pooled down to ``size``, mimicking photos downscaled to thumbnail
    resolution. Patches that are near-uniform (grayscale std below
    ``min_contrast`` byte units) or tonally flat (best per-channel max-min span
    below ``min_range`` bytes) are discarded so the corpus resembles
    object-centered photo crops rather than empty sky or smooth texture.
    Deterministic for fixed arguments.
    """
    import skimage.data as skdata

    rng = np.random.default_rng(seed)
    all_images = []
    all_labels = []
    for label, (name, is_rgb) in enumerate(_PATCH_SOURCES):
        photo = getattr(skdata, name)()
        arr = np.asarray(photo, dtype=np.float32)
        if not is_rgb:
            arr = np.repeat(arr[..., None], 3, axis=-1)
        hh, ww = arr.shape[:2]
        patches = []
        for k in scales:
            win = size * k
            if win > min(hh, ww):
                continue
            stride = max(16, win // 2)
            for top in range(0, hh - win + 1, stride):
                for left in range(0, ww - win + 1, stride):
                    window = arr[top : top + win, left : left + win, :]
                    patch = window.reshape(size, k, size, k, 3).mean(axis=(1, 3))
                    if float(patch.mean(axis=-1).std()) < min_contrast:
                        continue
                    span = patch.max(axis=(0, 1)) - patch.min(axis=(0, 1))
                    if float(span.max()) < min_range:
                        continue
                    patches.append(np.transpose(patch, (2, 0, 1)))  # HWC -> CHW
        if not patches:
            continue
        stack = np.stack(patches)
        if len(stack) > per_class:
            keep = rng.choice(len(stack), size=per_class, replace=False)
            stack = stack[np.sort(keep)]
        all_images.append(stack)
        all_labels.append(np.full(len(stack), label, dtype=np.int64))
    images = np.concatenate(all_images)
    labels = np.concatenate(all_labels)
    order = rng.permutation(len(images))
    return LabeledDataset(
        images[order],
        labels[order],
        num_classes=len(_PATCH_SOURCES),
        domain=Domain.RAW_BYTE,
    )


def locate_cifar10(explicit: Optional[str] = None) -> Optional[Path]:
    """Directory holding the CIFAR-10 binary batches, or None.

    Checks, in order: the explicit argument, the STATTRIGGER_CIFAR10_DIR
    environment variable, and ./data/cifar-10-batches-bin.
    """
    candidates = [explicit, os.environ.get(CIFAR10_ENV_VAR), "data/cifar-10-batches-bin"]
    for cand in candidates:
        if not cand:
            continue
        path = Path(cand)
        if (path / "data_batch_1.bin").exists():
            return path
    return None


def reference_corpus(seed: int = 0) -> tuple[LabeledDataset, LabeledDataset, str]:
    """(train, test, description) natural-image corpus for verification runs.

    Real CIFAR-10 when available locally, else the bundled-photograph patch
    corpus split 6:1.
    """
    cifar_dir = locate_cifar10()
    if cifar_dir is not None:
        from .io import load_cifar10

        train = load_cifar10(cifar_dir, split="train")
        test = load_cifar10(cifar_dir, split="test")
        return train, test, f"cifar10 at {cifar_dir}"
    ds = natural_patches(seed=seed)
    n_test = len(ds) // 7
    test = LabeledDataset(
        ds.images[:n_test], ds.labels[:n_test], ds.num_classes, ds.domain
    )
    train = LabeledDataset(
        ds.images[n_test:], ds.labels[n_test:], ds.num_classes, ds.domain
    )
    return train, test, "bundled-photograph patches (no local cifar10 found)"
