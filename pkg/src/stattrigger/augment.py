"""Shape-preserving image augmentations used by the robustness checks.

All kinds keep the (c, h, w) shape; geometry-changing kinds fill vacated
regions with zeros, which is exactly the missing-sample effect the masking
bound models. Stochastic kinds are reproducible through their seed: a fresh
generator is derived per call, so applying the same augmentation twice yields
identical output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
import numpy as np
from scipy import ndimage

from .errors import BadParameter
from .tensor import Domain, ImageTensor


class AugKind(enum.Enum):
    HFLIP = "hflip"
    VFLIP = "vflip"
    CENTER_CROP = "center-crop"
    GAUSSIAN_NOISE = "gaussian-noise"
    ROTATE = "rotate"
    AFFINE_MASK = "affine-mask"
    SCALE_DOWN_PAD = "scale-down-pad"
    MEDIAN_FILTER_SCALE = "median-filter-scale"
    OPTICAL_DISTORT = "optical-distort"


@dataclass(frozen=True)
class Augmentation:
    """One augmentation: kind, kind-specific parameters, and a seed."""

    kind: AugKind
    params: dict = field(default_factory=dict)
    seed: int = 0

    @staticmethod
    def hflip() -> "Augmentation":
        return Augmentation(AugKind.HFLIP)

    @staticmethod
    def vflip() -> "Augmentation":
        return Augmentation(AugKind.VFLIP)

    @staticmethod
    def center_crop(fraction: float) -> "Augmentation":
        if not 0.0 < fraction <= 1.0:
            raise BadParameter("crop fraction must lie in (0, 1]")
        return Augmentation(AugKind.CENTER_CROP, {"fraction": fraction})

    @staticmethod
    def gaussian_noise(variance: float, seed: int = 0) -> "Augmentation":
        if variance < 0:
            raise BadParameter("noise variance must be >= 0")
        return Augmentation(AugKind.GAUSSIAN_NOISE, {"variance": variance}, seed)

    @staticmethod
    def rotate(degrees: float) -> "Augmentation":
        return Augmentation(AugKind.ROTATE, {"degrees": degrees})

    @staticmethod
    def affine_mask(mask_fraction: float, seed: int = 0) -> "Augmentation":
        if not 0.0 <= mask_fraction < 1.0:
            raise BadParameter("mask fraction must lie in [0, 1)")
        return Augmentation(AugKind.AFFINE_MASK, {"mask_fraction": mask_fraction}, seed)

    @staticmethod
    def scale_down_pad(scale: float, seed: int = 0) -> "Augmentation":
        if not 0.0 < scale <= 1.0:
            raise BadParameter("scale must lie in (0, 1]")
        return Augmentation(AugKind.SCALE_DOWN_PAD, {"scale": scale}, seed)

    @staticmethod
    def median_filter_scale(kernel: int, scale: float) -> "Augmentation":
        if kernel < 1 or kernel % 2 == 0:
            raise BadParameter("median kernel must be a positive odd integer")
        if not 0.0 < scale <= 1.0:
            raise BadParameter("scale must lie in (0, 1]")
        return Augmentation(
            AugKind.MEDIAN_FILTER_SCALE, {"kernel": kernel, "scale": scale}
        )

    @staticmethod
    def optical_distort(strength: float, seed: int = 0) -> "Augmentation":
        if strength < 0:
            raise BadParameter("distortion strength must be >= 0")
        return Augmentation(AugKind.OPTICAL_DISTORT, {"strength": strength}, seed)


def mask_random_pixels(
    pixels: np.ndarray, fraction: float, rng: np.random.Generator
) -> np.ndarray:
    """Zero a random ``fraction`` of spatial positions across all channels."""
    c, h, w = pixels.shape
    out = pixels.astype(np.float64).copy()
    count = int(round(fraction * h * w))
    if count:
        pos = rng.choice(h * w, size=count, replace=False)
        out.reshape(c, -1)[:, pos] = 0.0
    return out


def _rotate_nearest(pixels: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the center, nearest-neighbor sampling, zeros outside."""
    c, h, w = pixels.shape
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    jj, kk = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dy, dx = jj - cy, kk - cx
    src_j = np.round(cy + cos * dy + sin * dx).astype(int)
    src_k = np.round(cx - sin * dy + cos * dx).astype(int)
    inside = (src_j >= 0) & (src_j < h) & (src_k >= 0) & (src_k < w)
    out = np.zeros_like(pixels, dtype=np.float64)
    out[:, inside] = pixels[:, src_j[inside], src_k[inside]]
    return out


def _scale_down_pad(
    pixels: np.ndarray, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Downscale by mean pooling onto a zero canvas at a random offset."""
    c, h, w = pixels.shape
    nh, nw = max(1, int(round(scale * h))), max(1, int(round(scale * w)))
    # sample the source on a regular grid (area-style via local mean)
    zoomed = np.stack(
        [
            ndimage.zoom(ch, (nh / h, nw / w), order=1, mode="nearest")
            for ch in pixels.astype(np.float64)
        ]
    )
    zoomed = zoomed[:, :nh, :nw]
    out = np.zeros((c, h, w), dtype=np.float64)
    top = int(rng.integers(0, h - nh + 1))
    left = int(rng.integers(0, w - nw + 1))
    out[:, top : top + nh, left : left + nw] = zoomed
    return out


def _optical_distort(
    pixels: np.ndarray, strength: float, rng: np.random.Generator
) -> np.ndarray:
    """Smooth random coordinate remap with zero fill."""
    c, h, w = pixels.shape
    coarse = rng.standard_normal((2, 4, 4))
    disp = np.stack(
        [ndimage.zoom(f, (h / 4, w / 4), order=3, mode="nearest") for f in coarse]
    )
    disp = disp[:, :h, :w] * strength
    jj, kk = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    coords = np.stack([jj + disp[0], kk + disp[1]])
    return np.stack(
        [
            ndimage.map_coordinates(
                ch, coords, order=1, mode="constant", cval=0.0
            )
            for ch in pixels.astype(np.float64)
        ]
    )


def apply_augmentation(img: ImageTensor, aug: Augmentation) -> ImageTensor:
    """Apply one augmentation; returns an image of identical shape.

    Geometry kinds (rotate, masks, crops, pads, distort) fill uncovered
    positions with zeros. Gaussian noise produces unbounded values and is
    therefore tagged standardized; every other kind keeps the input domain.
    """
    pixels = img.pixels
    kind, p = aug.kind, aug.params
    rng = np.random.default_rng(aug.seed)
    domain = img.domain
    if kind is AugKind.HFLIP:
        out = pixels[:, :, ::-1]
    elif kind is AugKind.VFLIP:
        out = pixels[:, ::-1, :]
    elif kind is AugKind.CENTER_CROP:
        c, h, w = pixels.shape
        kh = max(1, int(round(p["fraction"] * h)))
        kw = max(1, int(round(p["fraction"] * w)))
        top, left = (h - kh) // 2, (w - kw) // 2
        out = np.zeros_like(pixels, dtype=np.float64)
        out[:, top : top + kh, left : left + kw] = pixels[
            :, top : top + kh, left : left + kw
        ]
    elif kind is AugKind.GAUSSIAN_NOISE:
        out = pixels + rng.normal(0.0, np.sqrt(p["variance"]), pixels.shape)
        domain = Domain.STANDARDIZED
    elif kind is AugKind.ROTATE:
        out = _rotate_nearest(pixels, p["degrees"])
    elif kind is AugKind.AFFINE_MASK:
        out = mask_random_pixels(pixels, p["mask_fraction"], rng)
    elif kind is AugKind.SCALE_DOWN_PAD:
        out = _scale_down_pad(pixels, p["scale"], rng)
    elif kind is AugKind.MEDIAN_FILTER_SCALE:
        k = p["kernel"]
        filtered = ndimage.median_filter(
            pixels.astype(np.float64), size=(1, k, k), mode="nearest"
        )
        out = _scale_down_pad(filtered, p["scale"], rng)
    elif kind is AugKind.OPTICAL_DISTORT:
        out = _optical_distort(pixels, p["strength"], rng)
    else:  # pragma: no cover
        raise BadParameter(f"unknown augmentation kind {kind}")
    return ImageTensor(np.ascontiguousarray(out), domain)
