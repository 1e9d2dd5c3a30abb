"""Executable robustness checks for the statistical trigger.

Turns the trigger's stability arguments into measurements: the masking lower
bound for zero-filling transforms, the noise-shift ratio for additive Gaussian
noise, and the trigger-survival rate under a battery of augmentations. Survival
here means the transformed image still clears the statistic threshold; model
attack success lives in the training harness, not in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .augment import Augmentation, apply_augmentation, mask_random_pixels
from .features import StatFeatureConfig, stat_value, stat_values
from .tensor import ImageTensor

MASKING_SLACK_FACTOR = 0.05  # slack = factor * amplification


@dataclass(frozen=True)
class BoundReport:
    """Masking bound measurement over an image collection."""

    mask_fraction: float
    slack: float
    count: int
    violations: int

    @property
    def violation_rate(self) -> float:
        return self.violations / self.count if self.count else 0.0


def verify_masking_bound(
    imgs: Sequence[ImageTensor],
    r: float,
    cfg: StatFeatureConfig,
    seed: int = 0,
) -> BoundReport:
    """Check statistic(masked) >= (1-r) * (statistic - a) - 0.05 * a per image.

    Masking zeroes a uniformly random fraction ``r`` of spatial positions, the
    abstraction of rotation/affine-style zero filling.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("mask fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    a = cfg.amplification
    slack = MASKING_SLACK_FACTOR * a
    violations = 0
    for img in imgs:
        original = stat_value(img, cfg)
        masked = mask_random_pixels(img.pixels, r, rng)
        lhs = float(stat_values(masked[None], cfg)[0])
        rhs = (1.0 - r) * (original - a) - slack
        if lhs < rhs:
            violations += 1
    return BoundReport(r, slack, len(imgs), violations)


@dataclass(frozen=True)
class NoiseReport:
    """Mean statistic ratios after additive unit-variance Gaussian noise.

    ``grayscale_ratio``: one noise plane shared by all channels, so the
    grayscale grid gains the full unit variance (the 2x regime when the clean
    grayscale variance is ~1). ``channel_ratio``: independent noise per channel
    pixel; channel averaging divides the added variance by the channel count
    (the 1 + 1/c regime).
    """

    trials: int
    grayscale_ratio: float
    channel_ratio: float


def verify_noise_shift(
    imgs: Sequence[ImageTensor],
    trials: int = 1000,
    variance: float = 1.0,
    cfg: StatFeatureConfig | None = None,
    seed: int = 0,
) -> NoiseReport:
    """Measure E[statistic(x + noise)] / E[statistic(x)] in both noise modes."""
    cfg = cfg or StatFeatureConfig()
    rng = np.random.default_rng(seed)
    scale = np.sqrt(variance)
    stack = np.stack([img.pixels for img in imgs])
    n, c, h, w = stack.shape
    clean_sum = 0.0
    gray_sum = 0.0
    chan_sum = 0.0
    for t in range(trials):
        i = t % n
        pixels = stack[i]
        clean_sum += float(stat_values(pixels[None], cfg)[0])
        plane = rng.normal(0.0, scale, (1, h, w))
        gray_sum += float(stat_values((pixels + plane)[None], cfg)[0])
        chan = rng.normal(0.0, scale, (c, h, w))
        chan_sum += float(stat_values((pixels + chan)[None], cfg)[0])
    if clean_sum == 0.0:
        return NoiseReport(trials, float("nan"), float("nan"))
    return NoiseReport(trials, gray_sum / clean_sum, chan_sum / clean_sum)


@dataclass(frozen=True)
class SurvivalRow:
    augmentation: str
    survival: float
    count: int


def asr_under_augmentation(
    triggered: Sequence[ImageTensor],
    augs: Sequence[Augmentation],
    cfg: StatFeatureConfig,
    th: float,
) -> list[SurvivalRow]:
    """Fraction of triggered images whose statistic stays >= th per augmentation.

    This is the trigger-survival proxy for attack success: a triggered input
    that keeps its statistic above the threshold still activates the backdoor.
    """
    rows = []
    for aug in augs:
        survived = 0
        for img in triggered:
            out = apply_augmentation(img, aug)
            if stat_value(out, cfg) >= th:
                survived += 1
        rows.append(
            SurvivalRow(aug.kind.value, survived / max(1, len(triggered)), len(triggered))
        )
    return rows
