"""Trigger activation: the power-stretch transform that shifts the statistic.

The transform subtracts each channel's minimum, raises the shifted pixels to a
power gamma, and blends the result back into the original image with merge
ratio lambda. gamma > 1 widens the gap between bright and dark pixels (raising
the statistic); gamma < 1 compresses it (lowering the statistic). When a single
application misses the target threshold, a geometric escalation schedule
retries with stronger parameters and logs every attempt.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ActivationFailed, SuppressionFailed, ZeroSigma
from .features import StatFeatureConfig, stat_value
from .tensor import Domain, ImageTensor, StdStats

GAMMA_GROWTH = 1.25  # per escalation round when raising the statistic
GAMMA_SHRINK = 0.8  # per escalation round when lowering it
LAMBDA_GROWTH = 1.5  # kicks in once gamma exceeds LAMBDA_KICKIN
LAMBDA_KICKIN = 12.0
DEFAULT_MAX_ESCALATIONS = 8


class Direction(enum.Enum):
    INCREASE = "increase"
    DECREASE = "decrease"


@dataclass(frozen=True)
class ActivationParams:
    """Transform parameters plus the escalation policy.

    Defaults follow the activation regime used throughout: gamma 6, lambda 0.1.
    """

    gamma: float = 6.0
    lam: float = 0.1
    target_threshold: Optional[float] = None
    direction: Direction = Direction.INCREASE
    max_escalations: int = DEFAULT_MAX_ESCALATIONS

    def __post_init__(self):
        if self.direction is Direction.INCREASE and not self.gamma > 1.0:
            raise ValueError("increase direction requires gamma > 1")
        if self.direction is Direction.DECREASE and not 0.0 < self.gamma < 1.0:
            raise ValueError("decrease direction requires 0 < gamma < 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.max_escalations < 0:
            raise ValueError("max_escalations must be >= 0")


@dataclass(frozen=True)
class EscalationAttempt:
    gamma: float
    lam: float
    stat_value: float


@dataclass(frozen=True)
class EscalationLog:
    """Record of every (gamma, lambda, statistic) tried for one image."""

    attempts: tuple[EscalationAttempt, ...] = field(default=())
    succeeded: bool = False

    @property
    def rounds(self) -> int:
        """Escalations beyond the first attempt."""
        return max(0, len(self.attempts) - 1)

    def to_dict(self) -> dict:
        return {
            "succeeded": self.succeeded,
            "attempts": [
                {"gamma": a.gamma, "lambda": a.lam, "stat_value": a.stat_value}
                for a in self.attempts
            ],
        }


def power_stretch(pixels: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Blend of lam * (pixels - per-channel min) ** gamma with (1-lam) * pixels.

    Works on (c, h, w) or (n, c, h, w) arrays; returns float64.
    """
    x = pixels.astype(np.float64)
    channel_min = x.min(axis=(-2, -1), keepdims=True)
    shifted = x - channel_min  # >= 0 exactly
    return lam * np.power(shifted, gamma) + (1.0 - lam) * x


def apply_transform(img: ImageTensor, p: ActivationParams) -> ImageTensor:
    """Apply the power-stretch transform once. Shape-preserving, no clamping.

    Output pixels are unbounded reals, so the result is tagged standardized;
    clamping back to a byte range is an export-time concern.
    """
    out = power_stretch(img.pixels, p.gamma, p.lam)
    return ImageTensor(out, Domain.STANDARDIZED)


def _escalation_schedule(p: ActivationParams, factor: float):
    """Yield (gamma, lambda) for the initial attempt plus each escalation."""
    gamma, lam = p.gamma, p.lam
    yield gamma, lam
    for _ in range(p.max_escalations):
        gamma *= factor
        if factor > 1.0 and gamma > LAMBDA_KICKIN:
            lam = min(1.0, lam * LAMBDA_GROWTH)
        yield gamma, lam


def activate_to_threshold(
    img: ImageTensor, p: ActivationParams, cfg: StatFeatureConfig
) -> tuple[ImageTensor, EscalationLog]:
    """Transform until the statistic reaches the target threshold.

    Always applies the transform at least once (the attack always emits a
    transformed image). Escalates gamma by x1.25 per round, and once gamma
    passes 12 also grows lambda by x1.5 capped at 1. Raises
    :class:`ActivationFailed` when the budget is exhausted, e.g. on constant
    images whose statistic cannot move.
    """
    if p.target_threshold is None:
        raise ValueError("target_threshold must be set")
    if p.direction is not Direction.INCREASE:
        raise ValueError("activation requires the increase direction")
    th = p.target_threshold
    attempts = []
    for gamma, lam in _escalation_schedule(p, GAMMA_GROWTH):
        candidate = apply_transform(img, replace(p, gamma=gamma, lam=lam))
        value = stat_value(candidate, cfg)
        attempts.append(EscalationAttempt(gamma, lam, value))
        if value >= th:
            return candidate, EscalationLog(tuple(attempts), succeeded=True)
    raise ActivationFailed(
        f"statistic stayed below {th} after {p.max_escalations} escalations",
        log=EscalationLog(tuple(attempts), succeeded=False),
    )


def suppress_below_threshold(
    img: ImageTensor, p: ActivationParams, cfg: StatFeatureConfig
) -> tuple[ImageTensor, EscalationLog]:
    """Transform until the statistic drops strictly below the target threshold.

    An image already below the threshold is returned unchanged with an empty
    log. Escalates gamma by x0.8 per round; raises :class:`SuppressionFailed`
    when the budget is exhausted (e.g. threshold 0, which no image can beat).
    """
    if p.target_threshold is None:
        raise ValueError("target_threshold must be set")
    if p.direction is not Direction.DECREASE:
        raise ValueError("suppression requires the decrease direction")
    th = p.target_threshold
    if stat_value(img, cfg) < th:
        return img, EscalationLog((), succeeded=True)
    attempts = []
    for gamma, lam in _escalation_schedule(p, GAMMA_SHRINK):
        candidate = apply_transform(img, replace(p, gamma=gamma, lam=lam))
        value = stat_value(candidate, cfg)
        attempts.append(EscalationAttempt(gamma, lam, value))
        if value < th:
            return candidate, EscalationLog(tuple(attempts), succeeded=True)
    raise SuppressionFailed(
        f"statistic stayed at or above {th} after {p.max_escalations} escalations",
        log=EscalationLog(tuple(attempts), succeeded=False),
    )


def apply_standardization(img: ImageTensor, stats: StdStats) -> ImageTensor:
    """Pointwise (p - mu) / sigma with dataset statistics.

    Used as the trigger in the no-standardization setting: it drives the
    grayscale mean toward zero, which inflates the variance-over-mean
    statistic. Raises :class:`ZeroSigma` for sigma <= 0.
    """
    if stats.sigma <= 0:
        raise ZeroSigma("sigma must be strictly positive")
    out = (img.pixels.astype(np.float64) - stats.mu) / stats.sigma
    return ImageTensor(out, Domain.STANDARDIZED)
