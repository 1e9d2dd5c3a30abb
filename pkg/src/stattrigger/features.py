"""The statistical trigger value: amplified grayscale variance of an image.

Two variants exist. The plain one multiplies the sample variance of the
grayscale grid by an amplification factor; the coefficient-of-variation style
one additionally divides by the grayscale mean, which makes it usable on
datasets that were never standardized.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sstats

from .errors import (
    EmptyDataset,
    InsufficientSample,
    TieWarning,
    WrongDomain,
    ZeroMean,
)
from .tensor import Domain, ImageTensor, LabeledDataset, grayscale_grid

DEFAULT_AMPLIFICATION = 100.0
_MEAN_EPS = 1e-12


class Variant(enum.Enum):
    VARIANCE = "variance"
    VARIANCE_OVER_MEAN = "variance-over-mean"


@dataclass(frozen=True)
class StatFeatureConfig:
    """Amplification factor and variant selector for the trigger statistic."""

    amplification: float = DEFAULT_AMPLIFICATION
    variant: Variant = Variant.VARIANCE

    def __post_init__(self):
        if not self.amplification > 0:
            raise ValueError("amplification must be > 0")


def _gray_moments(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-image (sample variance, mean) of grayscale grids shaped (..., h, w)."""
    flat = gray.reshape(gray.shape[:-2] + (-1,))
    n = flat.shape[-1]
    mean = np.mean(flat, axis=-1, dtype=np.float64)
    if n > 1:
        var = np.var(flat, axis=-1, ddof=1, dtype=np.float64)
    else:
        var = np.zeros_like(mean)
    return var, mean


def stat_values(pixels: np.ndarray, cfg: StatFeatureConfig) -> np.ndarray:
    """Trigger statistic for a (n, c, h, w) batch, vectorized in float64."""
    var, mean = _gray_moments(grayscale_grid(pixels))
    if cfg.variant is Variant.VARIANCE:
        return cfg.amplification * var
    if np.any(np.abs(mean) < _MEAN_EPS):
        raise ZeroMean("grayscale mean ~ 0; variance-over-mean undefined")
    return cfg.amplification * var / mean


def stat_value(img: ImageTensor, cfg: StatFeatureConfig) -> float:
    """Trigger statistic of one image.

    Plain variant: amplification * sample variance of the grayscale grid.
    Variance-over-mean variant divides by the grayscale mean and raises
    :class:`ZeroMean` when |mean| < 1e-12.
    """
    return float(stat_values(img.pixels[None], cfg)[0])


def threshold_from_ratio(
    ds: LabeledDataset, cfg: StatFeatureConfig, ratio: float
) -> float:
    """Statistic value that cuts off the top-``ratio`` tail of the training set.

    Returns the k-th largest statistic with k = ceil(ratio * n), so images with
    value >= threshold form (up to ties) the requested fraction. Emits
    :class:`TieWarning` when tied values make the cut overshoot.
    """
    if len(ds) == 0:
        raise EmptyDataset("threshold needs a non-empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    values = stat_values(ds.images, cfg)
    n = values.size
    k = min(n, int(np.ceil(ratio * n)))
    th = float(np.partition(values, n - k)[n - k])  # k-th largest
    selected = int(np.sum(values >= th))
    if selected > k:
        warnings.warn(
            f"tied statistic values at the cut: ratio {ratio} selects "
            f"{selected}/{n} images instead of {k}",
            TieWarning,
            stacklevel=2,
        )
    return th


@dataclass(frozen=True)
class DistributionReport:
    """Goodness-of-fit of empirical trigger statistics to the scaled chi-square law.

    The reference for standardized (c, h, w) images is chi-square with
    h*w - 1 degrees of freedom scaled by amplification / (c * (h*w - 1)).
    """

    sample_count: int
    degrees_of_freedom: int
    scale: float
    ks_statistic: float
    empirical_cdf_points: tuple[tuple[float, float], ...] = field(repr=False)

    def __post_init__(self):
        if not 0.0 <= self.ks_statistic <= 1.0:
            raise ValueError("ks_statistic must lie in [0, 1]")
        vals = [p[0] for p in self.empirical_cdf_points]
        fracs = [p[1] for p in self.empirical_cdf_points]
        if sorted(vals) != vals or sorted(fracs) != fracs:
            raise ValueError("empirical cdf points must be sorted and monotone")


def distribution_audit(
    sample: Sequence[ImageTensor], cfg: StatFeatureConfig, max_cdf_points: int = 1024
) -> DistributionReport:
    """Kolmogorov-Smirnov audit of the statistic against its theoretical law.

    Requires >= 500 standardized images and the plain variance variant; under
    those conditions the statistic of unit-variance pixel data follows the
    scaled chi-square reference, so different standardized datasets share one
    distribution.
    """
    if cfg.variant is not Variant.VARIANCE:
        raise WrongDomain("distribution audit is defined for the variance variant")
    if len(sample) < 500:
        raise InsufficientSample(f"need >= 500 images, got {len(sample)}")
    if any(img.domain is not Domain.STANDARDIZED for img in sample):
        raise WrongDomain("distribution audit requires standardized images")
    shapes = {img.shape for img in sample}
    if len(shapes) != 1:
        raise ValueError("all sample images must share one shape")
    c, h, w = shapes.pop()
    df = h * w - 1
    scale = cfg.amplification / (c * df)
    values = stat_values(np.stack([img.pixels for img in sample]), cfg)
    reference = sstats.chi2(df, scale=scale)
    ks = float(sstats.kstest(values, reference.cdf).statistic)
    order = np.sort(values)
    n = order.size
    idx = np.unique(np.linspace(0, n - 1, min(max_cdf_points, n)).astype(int))
    points = tuple((float(order[i]), float((i + 1) / n)) for i in idx)
    return DistributionReport(
        sample_count=n,
        degrees_of_freedom=df,
        scale=scale,
        ks_statistic=ks,
        empirical_cdf_points=points,
    )
