"""Core image/dataset containers and the dataset-level standardization transform.

Images are (channels, height, width) grids of real-valued pixels tagged with the
value domain they live in. Containers are immutable after construction so they
can be shared freely across parallel maps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import EmptyDataset, ZeroVariance


class Domain(enum.Enum):
    """Value domain of pixel data."""

    RAW_BYTE = "raw_byte"  # [0, 255]
    UNIT = "unit"  # [0, 1]
    STANDARDIZED = "standardized"  # unbounded

    @property
    def bounds(self) -> Optional[tuple[float, float]]:
        if self is Domain.RAW_BYTE:
            return (0.0, 255.0)
        if self is Domain.UNIT:
            return (0.0, 1.0)
        return None


@dataclass(frozen=True)
class StdStats:
    """Global scalar standardization statistics of a dataset.

    ``mu`` and ``sigma`` are expressed in the units of ``source_domain``, the
    domain the dataset had before standardization.
    """

    mu: float
    sigma: float
    source_domain: Domain


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_domain(pixels: np.ndarray, domain: Domain) -> None:
    bounds = domain.bounds
    if bounds is None:
        if not np.all(np.isfinite(pixels)):
            raise ValueError("standardized pixels must be finite")
        return
    lo, hi = bounds
    pmin = float(pixels.min()) if pixels.size else lo
    pmax = float(pixels.max()) if pixels.size else lo
    if pmin < lo or pmax > hi:
        raise ValueError(
            f"pixels outside {domain.value} bounds [{lo}, {hi}]: "
            f"seen [{pmin}, {pmax}]"
        )


@dataclass(frozen=True)
class ImageTensor:
    """One image: (c, h, w) pixel grid plus its value-domain tag.

    Shape is immutable; the pixel buffer is marked read-only.
    """

    pixels: np.ndarray
    domain: Domain

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3:
            raise ValueError(f"expected (c, h, w) pixels, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dimensions must be positive, got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        _check_domain(arr, self.domain)
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape


def to_grayscale(img: ImageTensor) -> np.ndarray:
    """Per-pixel channel mean: an (h, w) float64 grid.

    For single-channel images this is the image plane itself. The output keeps
    the numeric range of the input domain; accumulation is done in 64-bit.
    """
    return grayscale_grid(img.pixels)


def grayscale_grid(pixels: np.ndarray) -> np.ndarray:
    """Channel mean of a (c, h, w) or (n, c, h, w) pixel array, in float64."""
    return np.mean(pixels, axis=-3, dtype=np.float64)


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered (image, label) collection with shared shape and optional stats.

    Stored as one stacked pixel array for fast whole-dataset statistics; item
    access materializes :class:`ImageTensor` views on demand.
    """

    images: np.ndarray  # (n, c, h, w)
    labels: np.ndarray  # (n,)
    num_classes: int
    domain: Domain
    std_stats: Optional[StdStats] = field(default=None)

    def __post_init__(self):
        images = np.asarray(self.images)
        labels = np.asarray(self.labels)
        if images.ndim != 4:
            raise ValueError(f"expected (n, c, h, w) images, got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ValueError("labels must be one small integer per image")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        if not np.issubdtype(images.dtype, np.floating):
            images = images.astype(np.float32)
        _check_domain(images, self.domain)
        # born-standardized data (e.g. synthetic) may have no source statistics
        if (self.domain is not Domain.STANDARDIZED) and self.std_stats is not None:
            raise ValueError("std_stats only valid on standardized datasets")
        object.__setattr__(self, "images", _freeze(images))
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int64)))

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.images.shape[1:]

    def image(self, i: int) -> ImageTensor:
        return ImageTensor(self.images[i], self.domain)

    def __getitem__(self, i: int) -> tuple[ImageTensor, int]:
        return self.image(i), int(self.labels[i])

    def __iter__(self) -> Iterator[tuple[ImageTensor, int]]:
        for i in range(len(self)):
            yield self[i]

    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        return replace(self, labels=labels)

    def with_images(self, images: np.ndarray, domain: Optional[Domain] = None) -> "LabeledDataset":
        return replace(self, images=images, domain=domain or self.domain)


def dataset_from_images(
    images: Sequence[ImageTensor],
    labels: Sequence[int],
    num_classes: int,
) -> LabeledDataset:
    """Stack per-image tensors (all sharing one shape and domain) into a dataset."""
    if not images:
        raise EmptyDataset("cannot build a dataset from zero images")
    domains = {img.domain for img in images}
    if len(domains) != 1:
        raise ValueError("all images must share one value domain")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ValueError("all images must share one (c, h, w) shape")
    stack = np.stack([img.pixels for img in images])
    return LabeledDataset(stack, np.asarray(labels), num_classes, domains.pop())


def standardize(ds: LabeledDataset) -> LabeledDataset:
    """Replace every pixel by (p - mu) / sigma with one global scalar (mu, sigma).

    The statistics are the mean and population standard deviation over all
    pixels of all images, computed in 64-bit. Re-running on an already
    standardized dataset recomputes mu ~ 0, sigma ~ 1 and is a numerical no-op.

    Raises :class:`ZeroVariance` on constant datasets.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot standardize an empty dataset")
    flat = ds.images.reshape(-1)
    mu = float(np.mean(flat, dtype=np.float64))
    sigma = float(np.std(flat, dtype=np.float64))
    if sigma == 0.0:
        raise ZeroVariance("dataset is constant; sigma = 0")
    out = (ds.images.astype(np.float64) - mu) / sigma
    stats = StdStats(mu=mu, sigma=sigma, source_domain=ds.domain)
    return LabeledDataset(
        out.astype(np.float32),
        ds.labels,
        ds.num_classes,
        Domain.STANDARDIZED,
        stats,
    )
