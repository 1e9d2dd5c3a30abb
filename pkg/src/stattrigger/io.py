"""Bit-exact dataset ingestion and export plus integrity manifests.

Three formats: the classic 32x32 binary layout (one label byte followed by
3072 channel-major pixel bytes per record), a lossless float32 tensor dump with
a trailing content hash, and folders of 8-bit PNG files. Every export writes a
JSON manifest with per-file SHA-256 hashes; loading through the manifest
verifies them. See docs/formats.md for byte-level layouts.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CorruptRecord, LabelOutOfRange, MissingStats
from .plan import PoisonPlan
from .tensor import Domain, LabeledDataset, StdStats

CIFAR_RECORD_BYTES = 3073
CIFAR_SHAPE = (3, 32, 32)
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"

DUMP_MAGIC = b"RTDUMP\x00"
DUMP_VERSION = 1
_DOMAIN_CODES = {Domain.RAW_BYTE: 0, Domain.UNIT: 1, Domain.STANDARDIZED: 2}
_DOMAIN_FROM_CODE = {v: k for k, v in _DOMAIN_CODES.items()}


class DatasetFormat(enum.Enum):
    CIFAR10_BINARY = "cifar10-binary"
    PNG_FOLDER = "png-folder"
    RAW_TENSOR_DUMP = "raw-tensor-dump"


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# --- 32x32 binary batches -------------------------------------------------------

def load_cifar10(path, split: Optional[str] = None, num_classes: int = 10) -> LabeledDataset:
    """Load binary batch file(s): a single .bin file, or a directory with the
    standard train/test batch names selected by ``split``.

    Raises :class:`CorruptRecord` when the byte count is not a whole number of
    records and :class:`LabelOutOfRange` for labels >= ``num_classes``.
    """
    path = Path(path)
    if path.is_dir():
        if split == "train" or split is None:
            files = [path / name for name in CIFAR_TRAIN_FILES]
        elif split == "test":
            files = [path / CIFAR_TEST_FILE]
        else:
            raise ValueError(f"unknown split {split!r}")
    else:
        files = [path]
    images = []
    labels = []
    for file in files:
        raw = file.read_bytes()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
            raise CorruptRecord(
                f"{file}: {len(raw)} bytes is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        file_labels = records[:, 0]
        if file_labels.max(initial=0) >= num_classes:
            raise LabelOutOfRange(
                f"{file}: label {int(file_labels.max())} >= {num_classes}"
            )
        images.append(records[:, 1:].reshape(-1, *CIFAR_SHAPE))
        labels.append(file_labels)
    return LabeledDataset(
        np.concatenate(images).astype(np.float32),
        np.concatenate(labels).astype(np.int64),
        num_classes,
        Domain.RAW_BYTE,
    )


def save_cifar10(ds: LabeledDataset, path) -> None:
    """Write one binary batch file. Requires byte-valued 3x32x32 pixels."""
    if ds.image_shape != CIFAR_SHAPE:
        raise ValueError(f"binary batch format is fixed to {CIFAR_SHAPE}")
    if ds.domain is not Domain.RAW_BYTE:
        raise ValueError("export to the binary batch format needs raw-byte pixels")
    pixels = np.asarray(ds.images)
    rounded = np.rint(pixels)
    if not np.array_equal(rounded, pixels):
        raise ValueError("pixels must hold whole byte values; de-standardize first")
    records = np.empty((len(ds), CIFAR_RECORD_BYTES), dtype=np.uint8)
    records[:, 0] = ds.labels.astype(np.uint8)
    records[:, 1:] = rounded.reshape(len(ds), -1).astype(np.uint8)
    Path(path).write_bytes(records.tobytes())


# --- raw tensor dump ---------------------------------------------------------------

def save_rawtensordump(ds: LabeledDataset, path) -> None:
    """Lossless float32 dump: fixed header, pixel block, label block, SHA-256."""
    stats = ds.std_stats
    n = len(ds)
    c, h, w = ds.image_shape
    if ds.num_classes > 0xFFFF or n >= 2**32:
        raise ValueError("dataset too large for the dump header")
    header = DUMP_MAGIC + struct.pack(
        "<IIIIIBBH",
        DUMP_VERSION,
        n,
        c,
        h,
        w,
        _DOMAIN_CODES[ds.domain],
        1 if stats else 0,
        ds.num_classes,
    )
    header += struct.pack(
        "<ddB",
        stats.mu if stats else 0.0,
        stats.sigma if stats else 0.0,
        _DOMAIN_CODES[stats.source_domain] if stats else 0,
    )
    body = header
    body += np.ascontiguousarray(ds.images, dtype="<f4").tobytes()
    body += ds.labels.astype("<u2").tobytes()
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)


def load_rawtensordump(path) -> LabeledDataset:
    """Read a dump, verifying the trailing hash and the declared layout."""
    raw = Path(path).read_bytes()
    if len(raw) < len(DUMP_MAGIC) + 24 + 17 + 32 or raw[: len(DUMP_MAGIC)] != DUMP_MAGIC:
        raise CorruptRecord(f"{path}: not a raw tensor dump")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptRecord(f"{path}: content hash mismatch")
    offset = len(DUMP_MAGIC)
    version, n, c, h, w, domain_code, has_stats, num_classes = struct.unpack_from(
        "<IIIIIBBH", body, offset
    )
    offset += struct.calcsize("<IIIIIBBH")
    mu, sigma, stats_source = struct.unpack_from("<ddB", body, offset)
    offset += struct.calcsize("<ddB")
    if version != DUMP_VERSION:
        raise CorruptRecord(f"{path}: unsupported dump version {version}")
    pixel_bytes = n * c * h * w * 4
    label_bytes = n * 2
    if len(body) != offset + pixel_bytes + label_bytes:
        raise CorruptRecord(f"{path}: body length does not match the header")
    images = np.frombuffer(body, dtype="<f4", count=n * c * h * w, offset=offset)
    labels = np.frombuffer(
        body, dtype="<u2", count=n, offset=offset + pixel_bytes
    )
    if num_classes and labels.size and labels.max() >= num_classes:
        raise LabelOutOfRange(f"{path}: label {int(labels.max())} >= {num_classes}")
    domain = _DOMAIN_FROM_CODE[domain_code]
    stats = (
        StdStats(mu, sigma, _DOMAIN_FROM_CODE[stats_source]) if has_stats else None
    )
    return LabeledDataset(
        images.reshape(n, c, h, w).copy(),
        labels.astype(np.int64),
        num_classes,
        domain,
        stats,
    )


# --- PNG folders --------------------------------------------------------------------

def save_png_folder(ds: LabeledDataset, path) -> list[Path]:
    """One 8-bit PNG per image, named ``<index>_<label>.png``."""
    from PIL import Image

    if ds.domain is not Domain.RAW_BYTE:
        raise ValueError("PNG export needs raw-byte pixels; de-standardize first")
    out_dir = Path(path)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(len(ds)):
        pixels = np.rint(ds.images[i]).astype(np.uint8)
        if pixels.shape[0] == 1:
            img = Image.fromarray(pixels[0], mode="L")
        elif pixels.shape[0] == 3:
            img = Image.fromarray(np.transpose(pixels, (1, 2, 0)), mode="RGB")
        else:
            raise ValueError("PNG export supports 1- or 3-channel images")
        file = out_dir / f"{i:06d}_{int(ds.labels[i])}.png"
        img.save(file)
        written.append(file)
    return written


def load_png_folder(path, num_classes: Optional[int] = None) -> LabeledDataset:
    """Read ``<index>_<label>.png`` files in name order; rejects 16-bit PNGs."""
    from PIL import Image

    files = sorted(Path(path).glob("*.png"))
    if not files:
        raise CorruptRecord(f"{path}: no .png files found")
    images = []
    labels = []
    for file in files:
        with Image.open(file) as img:
            if img.mode in ("I", "I;16", "I;16B", "I;16L"):
                raise CorruptRecord(f"{file}: 16-bit PNGs are rejected, not truncated")
            arr = np.asarray(img.convert("RGB"), dtype=np.float32)
        images.append(np.transpose(arr, (2, 0, 1)))
        try:
            labels.append(int(file.stem.split("_")[1]))
        except (IndexError, ValueError) as exc:
            raise CorruptRecord(f"{file}: name does not carry a label") from exc
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 1
    if labels.max(initial=0) >= num_classes:
        raise LabelOutOfRange(f"{path}: label {int(labels.max())} >= {num_classes}")
    return LabeledDataset(np.stack(images), labels, num_classes, Domain.RAW_BYTE)


# --- manifest and the export front door ------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    """Integrity record written next to every export."""

    format: DatasetFormat
    files: dict  # relative path -> sha256
    count: int
    image_shape: tuple[int, int, int]
    num_classes: int
    domain: Domain
    std_stats: Optional[StdStats] = None
    clamp_count: int = 0
    poison_plan: Optional[str] = None
    sources: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "format": self.format.value,
            "files": self.files,
            "count": self.count,
            "image_shape": list(self.image_shape),
            "num_classes": self.num_classes,
            "domain": self.domain.value,
            "std_stats": (
                {
                    "mu": self.std_stats.mu,
                    "sigma": self.std_stats.sigma,
                    "source_domain": self.std_stats.source_domain.value,
                }
                if self.std_stats
                else None
            ),
            "clamp_count": self.clamp_count,
            "poison_plan": self.poison_plan,
            "sources": list(self.sources),
        }

    @staticmethod
    def from_dict(record: dict) -> "DatasetManifest":
        stats = record.get("std_stats")
        return DatasetManifest(
            format=DatasetFormat(record["format"]),
            files=dict(record["files"]),
            count=record["count"],
            image_shape=tuple(record["image_shape"]),
            num_classes=record["num_classes"],
            domain=Domain(record["domain"]),
            std_stats=(
                StdStats(stats["mu"], stats["sigma"], Domain(stats["source_domain"]))
                if stats
                else None
            ),
            clamp_count=record.get("clamp_count", 0),
            poison_plan=record.get("poison_plan"),
            sources=tuple(record.get("sources", ())),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def load(path) -> "DatasetManifest":
        return DatasetManifest.from_dict(json.loads(Path(path).read_text()))

    def verify(self, base_dir) -> None:
        """Recompute every file hash; raise :class:`CorruptRecord` on mismatch."""
        base = Path(base_dir)
        for rel, expected in self.files.items():
            actual = _sha256_file(base / rel)
            if actual != expected:
                raise CorruptRecord(f"{rel}: hash mismatch (expected {expected[:12]}...)")


def _destandardize(ds: LabeledDataset) -> tuple[LabeledDataset, int]:
    """Back to raw bytes using stored statistics; returns the clamp count."""
    stats = ds.std_stats
    if stats is None:
        raise MissingStats("dataset has no standardization statistics")
    values = ds.images.astype(np.float64) * stats.sigma + stats.mu
    if stats.source_domain is Domain.UNIT:
        values = values * 255.0
    elif stats.source_domain is not Domain.RAW_BYTE:
        raise MissingStats("stored statistics do not map back to a byte range")
    clamped = np.clip(values, 0.0, 255.0)
    clamp_count = int(np.sum((values < 0.0) | (values > 255.0)))
    bytes_ = np.rint(clamped)  # round half to even
    out = LabeledDataset(
        bytes_.astype(np.float32), ds.labels, ds.num_classes, Domain.RAW_BYTE
    )
    return out, clamp_count


def export_dataset(
    ds: LabeledDataset,
    format: DatasetFormat,
    path,
    poison_plan: Optional[PoisonPlan] = None,
) -> DatasetManifest:
    """Write the dataset plus its manifest; returns the manifest.

    Standardized data exports losslessly to the tensor dump. Byte formats
    de-standardize with the stored statistics, clamp into [0, 255] with
    round-half-to-even, and record how many pixels were clamped.
    """
    path = Path(path)
    clamp_count = 0
    if format in (DatasetFormat.CIFAR10_BINARY, DatasetFormat.PNG_FOLDER):
        to_write = ds
        if ds.domain is Domain.STANDARDIZED:
            to_write, clamp_count = _destandardize(ds)
        elif ds.domain is Domain.UNIT:
            to_write = LabeledDataset(
                np.rint(ds.images * 255.0).astype(np.float32),
                ds.labels,
                ds.num_classes,
                Domain.RAW_BYTE,
            )
    if format is DatasetFormat.CIFAR10_BINARY:
        save_cifar10(to_write, path)
        files = {path.name: _sha256_file(path)}
        base = path.parent
    elif format is DatasetFormat.PNG_FOLDER:
        written = save_png_folder(to_write, path)
        files = {f.name: _sha256_file(f) for f in written}
        base = path
    elif format is DatasetFormat.RAW_TENSOR_DUMP:
        save_rawtensordump(ds, path)
        files = {path.name: _sha256_file(path)}
        base = path.parent
    else:  # pragma: no cover
        raise ValueError(f"unknown format {format}")
    plan_name = None
    if poison_plan is not None:
        plan_path = base / (path.stem + ".plan.json")
        poison_plan.save(plan_path)
        files[plan_path.name] = _sha256_file(plan_path)
        plan_name = plan_path.name
    manifest = DatasetManifest(
        format=format,
        files=files,
        count=len(ds),
        image_shape=ds.image_shape,
        num_classes=ds.num_classes,
        domain=ds.domain,
        std_stats=ds.std_stats,
        clamp_count=clamp_count,
        poison_plan=plan_name,
        sources=(),
    )
    manifest.save(base / (path.stem + ".manifest.json"))
    return manifest


def load_dataset(path) -> LabeledDataset:
    """Format-sniffing loader: tensor dump, binary batches, or a PNG folder."""
    path = Path(path)
    if path.is_dir():
        if any(path.glob("*.png")):
            return load_png_folder(path)
        if (path / CIFAR_TRAIN_FILES[0]).exists():
            return load_cifar10(path, split="train")
        raise CorruptRecord(f"{path}: no recognizable dataset")
    with open(path, "rb") as fh:
        head = fh.read(len(DUMP_MAGIC))
    if head == DUMP_MAGIC:
        return load_rawtensordump(path)
    return load_cifar10(path)
