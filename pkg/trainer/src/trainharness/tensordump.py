"""Reader/writer for the toolkit's raw tensor dump files.

Independent implementation of the byte layout documented in docs/formats.md:
magic, version, (N, c, h, w), domain/stats header, float32 pixels, uint16
labels, trailing SHA-256.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"RTDUMP\x00"
VERSION = 1
HEADER = "<IIIIIBBH"
STATS = "<ddB"

DOMAIN_RAW_BYTE = 0
DOMAIN_UNIT = 1
DOMAIN_STANDARDIZED = 2


@dataclass
class TensorDump:
    images: np.ndarray  # (n, c, h, w) float32
    labels: np.ndarray  # (n,) int64
    num_classes: int
    domain: int
    mu: Optional[float] = None
    sigma: Optional[float] = None
    stats_domain: Optional[int] = None

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])


def read_dump(path) -> TensorDump:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: bad magic; not a tensor dump")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{path}: content hash mismatch")
    offset = len(MAGIC)
    version, n, c, h, w, domain, has_stats, num_classes = struct.unpack_from(
        HEADER, body, offset
    )
    offset += struct.calcsize(HEADER)
    mu, sigma, stats_domain = struct.unpack_from(STATS, body, offset)
    offset += struct.calcsize(STATS)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    count = n * c * h * w
    if len(body) != offset + count * 4 + n * 2:
        raise ValueError(f"{path}: length does not match header")
    images = (
        np.frombuffer(body, dtype="<f4", count=count, offset=offset)
        .reshape(n, c, h, w)
        .copy()
    )
    labels = np.frombuffer(body, dtype="<u2", count=n, offset=offset + count * 4)
    return TensorDump(
        images,
        labels.astype(np.int64),
        int(num_classes),
        int(domain),
        mu if has_stats else None,
        sigma if has_stats else None,
        int(stats_domain) if has_stats else None,
    )


def write_dump(dump: TensorDump, path) -> None:
    n, c, h, w = dump.images.shape
    has_stats = dump.mu is not None
    body = MAGIC + struct.pack(
        HEADER, VERSION, n, c, h, w, dump.domain, 1 if has_stats else 0, dump.num_classes
    )
    body += struct.pack(
        STATS,
        dump.mu if has_stats else 0.0,
        dump.sigma if has_stats else 0.0,
        dump.stats_domain if has_stats else 0,
    )
    body += np.ascontiguousarray(dump.images, dtype="<f4").tobytes()
    body += dump.labels.astype("<u2").tobytes()
    Path(path).write_bytes(body + hashlib.sha256(body).digest())
