"""Server-side implementation of the framed classifier-oracle protocol.

Independent of the toolkit's client; follows docs/oracle-protocol.md:
4-byte big-endian length + UTF-8 JSON, base64 tensor payloads, request_id
echo, predict / grad_loss_input ops, <= 256 images per batch.
"""

from __future__ import annotations

import base64
import json
import struct
from typing import BinaryIO, Optional

import numpy as np

MAX_FRAME = 256 * 1024 * 1024
MAX_BATCH = 256


def read_frame(stream: BinaryIO) -> Optional[dict]:
    header = stream.read(4)
    if not header:
        return None
    if len(header) < 4:
        raise ValueError("stream ended inside a frame header")
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ValueError("frame exceeds protocol limit")
    body = b""
    while len(body) < length:
        chunk = stream.read(length - len(body))
        if not chunk:
            raise ValueError("stream ended mid-frame")
        body += chunk
    return json.loads(body.decode("utf-8"))


def write_frame(stream: BinaryIO, record: dict) -> None:
    body = json.dumps(record, separators=(",", ":")).encode("utf-8")
    stream.write(struct.pack(">I", len(body)) + body)
    stream.flush()


def decode_tensor(record: dict) -> np.ndarray:
    shape = tuple(int(s) for s in record["shape"])
    dtype = record["dtype"]
    if dtype not in ("<f4", "<f8"):
        raise ValueError(f"unsupported dtype {dtype}")
    raw = base64.b64decode(record["data"])
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise ValueError("tensor byte count does not match its shape")
    return np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(shape)


def encode_tensor(arr: np.ndarray) -> dict:
    dtype = "<f8" if arr.dtype == np.float64 else "<f4"
    data = np.ascontiguousarray(arr, dtype=np.dtype(dtype))
    return {
        "shape": list(arr.shape),
        "dtype": dtype,
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def error(request_id, code: str, message: str) -> dict:
    return {
        "request_id": request_id,
        "status": "error",
        "error": {"code": code, "message": message},
    }


def serve_stream(oracle, reader: BinaryIO, writer: BinaryIO) -> None:
    """Answer requests until end of stream. ``oracle`` exposes predict() and
    grad_loss_input() over numpy batches."""
    while True:
        try:
            request = read_frame(reader)
        except (ValueError, json.JSONDecodeError) as exc:
            write_frame(writer, error(None, "bad_request", str(exc)))
            return
        if request is None:
            return
        write_frame(writer, handle(oracle, request))


def handle(oracle, request: dict) -> dict:
    request_id = request.get("request_id")
    op = request.get("op")
    batch = request.get("batch")
    if not isinstance(request_id, str) or op not in ("predict", "grad_loss_input"):
        return error(request_id, "bad_request", "bad request_id or op")
    if not isinstance(batch, list) or len(batch) > MAX_BATCH:
        return error(request_id, "bad_request", f"batch must be a list of <= {MAX_BATCH}")
    if not batch:
        key = "logits" if op == "predict" else "gradients"
        return {"request_id": request_id, "status": "ok", key: []}
    try:
        images = np.stack([decode_tensor(item) for item in batch])
    except (KeyError, ValueError) as exc:
        return error(request_id, "bad_request", f"malformed tensor: {exc}")
    try:
        if op == "predict":
            logits = np.asarray(oracle.predict(images), dtype=np.float64)
            return {"request_id": request_id, "status": "ok", "logits": logits.tolist()}
        if any("label" not in item for item in batch):
            return error(request_id, "bad_request", "grad_loss_input needs labels")
        labels = np.array([int(item["label"]) for item in batch])
        grads = oracle.grad_loss_input(images, labels)
        return {
            "request_id": request_id,
            "status": "ok",
            "gradients": [encode_tensor(g) for g in grads],
        }
    except ValueError as exc:
        return error(request_id, "shape_mismatch", str(exc))
