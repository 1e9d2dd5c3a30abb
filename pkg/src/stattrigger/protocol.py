"""Classifier-oracle wire protocol: framed JSON over a local duplex stream.

Frame layout: a 4-byte big-endian unsigned length followed by that many bytes
of UTF-8 JSON. Tensor payloads travel base64-encoded inside the JSON record
with explicit shape and little-endian dtype. One request is answered by exactly
one response carrying the same request_id; responses arriving out of order are
re-associated by id. See docs/oracle-protocol.md for the full field reference.
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import struct
import subprocess
import threading
from typing import BinaryIO, Optional, Sequence

import numpy as np

from .errors import OracleTimeout, OracleUnavailable, ShapeMismatch

MAX_FRAME_BYTES = 256 * 1024 * 1024
MAX_BATCH = 256

OP_PREDICT = "predict"
OP_GRAD = "grad_loss_input"

ERR_BAD_REQUEST = "bad_request"
ERR_SHAPE_MISMATCH = "shape_mismatch"
ERR_UNAVAILABLE = "unavailable"
ERR_INTERNAL = "internal"


# --- framing -----------------------------------------------------------------

def write_frame(stream: BinaryIO, record: dict) -> None:
    body = json.dumps(record, separators=(",", ":")).encode("utf-8")
    stream.write(struct.pack(">I", len(body)) + body)
    stream.flush()


def _read_exact(stream: BinaryIO, n: int) -> Optional[bytes]:
    chunks = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> Optional[dict]:
    """One JSON record, or None on clean end of stream."""
    header = _read_exact(stream, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise ShapeMismatch(f"frame of {length} bytes exceeds the protocol limit")
    body = _read_exact(stream, length)
    if body is None:
        raise ShapeMismatch("stream ended mid-frame")
    try:
        record = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ShapeMismatch(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ShapeMismatch("frame must hold a JSON object")
    return record


# --- tensor payloads ----------------------------------------------------------

_ALLOWED_DTYPES = {"<f4", "<f8"}


def encode_tensor(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    dtype = "<f8" if arr.dtype == np.float64 else "<f4"
    data = np.ascontiguousarray(arr, dtype=np.dtype(dtype))
    return {
        "shape": list(arr.shape),
        "dtype": dtype,
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def decode_tensor(record: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in record["shape"])
        dtype = record["dtype"]
        raw = base64.b64decode(record["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed tensor record: {exc}") from exc
    if dtype not in _ALLOWED_DTYPES:
        raise ShapeMismatch(f"unsupported dtype {dtype!r}")
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise ShapeMismatch(
            f"tensor data holds {len(raw)} bytes, shape {shape} needs {expected}"
        )
    return np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(shape)


# --- request/response records ---------------------------------------------------

def make_request(
    request_id: str,
    op: str,
    batch: np.ndarray,
    labels: Optional[Sequence[int]] = None,
) -> dict:
    items = []
    for i, image in enumerate(batch):
        item = encode_tensor(image)
        if labels is not None:
            item["label"] = int(labels[i])
        items.append(item)
    return {"request_id": request_id, "op": op, "batch": items}


def ok_response(request_id: str, **fields) -> dict:
    return {"request_id": request_id, "status": "ok", **fields}


def error_response(request_id: Optional[str], code: str, message: str) -> dict:
    return {
        "request_id": request_id,
        "status": "error",
        "error": {"code": code, "message": message},
    }


# --- server loop ----------------------------------------------------------------

def serve_oracle_stream(oracle, reader: BinaryIO, writer: BinaryIO) -> None:
    """Answer framed requests with the given oracle until end of stream.

    Useful for exec-addressed oracles speaking over stdio and for tests; the
    training harness ships its own server for trained models.
    """
    while True:
        try:
            request = read_frame(reader)
        except ShapeMismatch as exc:
            write_frame(writer, error_response(None, ERR_BAD_REQUEST, str(exc)))
            return
        if request is None:
            return
        write_frame(writer, _answer(oracle, request))


def _answer(oracle, request: dict) -> dict:
    request_id = request.get("request_id")
    op = request.get("op")
    batch_records = request.get("batch")
    if not isinstance(request_id, str) or op not in (OP_PREDICT, OP_GRAD):
        return error_response(request_id, ERR_BAD_REQUEST, "bad request_id or op")
    if not isinstance(batch_records, list):
        return error_response(request_id, ERR_BAD_REQUEST, "batch must be a list")
    if len(batch_records) > MAX_BATCH:
        return error_response(
            request_id, ERR_BAD_REQUEST, f"batch exceeds {MAX_BATCH} images"
        )
    if not batch_records:
        if op == OP_PREDICT:
            return ok_response(request_id, logits=[])
        return ok_response(request_id, gradients=[])
    try:
        batch = np.stack([decode_tensor(r) for r in batch_records])
        if op == OP_PREDICT:
            logits = np.asarray(oracle.predict(batch), dtype=np.float64)
            return ok_response(request_id, logits=logits.tolist())
        if any("label" not in r for r in batch_records):
            return error_response(
                request_id, ERR_BAD_REQUEST, "grad_loss_input needs labels"
            )
        labels = np.array([int(r["label"]) for r in batch_records])
        grads = oracle.grad_loss_input(batch, labels)
        return ok_response(
            request_id, gradients=[encode_tensor(g) for g in grads]
        )
    except ShapeMismatch as exc:
        return error_response(request_id, ERR_SHAPE_MISMATCH, str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        return error_response(request_id, ERR_INTERNAL, repr(exc))


# --- client ----------------------------------------------------------------------

class _Connection:
    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        self.reader = reader
        self.writer = writer

    def close(self) -> None:
        for stream in (self.reader, self.writer):
            try:
                stream.close()
            except OSError:
                pass


class RemoteOracle:
    """Client presenting the oracle interface over a framed connection.

    Requests are serialized through an internal lock (one in flight per
    connection); batches above the protocol limit are chunked transparently.
    Stray responses are re-associated by request_id.
    """

    def __init__(self, connection: _Connection, timeout: Optional[float] = None):
        self._conn = connection
        self._lock = threading.Lock()
        self._counter = 0
        self._pending: dict[str, dict] = {}
        self.timeout = timeout

    # -- addressing ------------------------------------------------------------

    @staticmethod
    def connect_tcp(host: str, port: int, timeout: float = 30.0) -> "RemoteOracle":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise OracleUnavailable(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.settimeout(timeout)
        reader = sock.makefile("rb")
        writer = sock.makefile("wb")
        conn = _Connection(reader, writer)
        conn._socket = sock  # keep alive
        return RemoteOracle(conn, timeout=timeout)

    @staticmethod
    def connect_exec(command: str) -> "RemoteOracle":
        try:
            proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise OracleUnavailable(f"cannot spawn {command!r}: {exc}") from exc
        conn = _Connection(proc.stdout, proc.stdin)
        conn._process = proc  # keep alive
        return RemoteOracle(conn)

    def close(self) -> None:
        self._conn.close()
        proc = getattr(self._conn, "_process", None)
        if proc is not None:
            proc.terminate()
            proc.wait(timeout=5)

    # -- request plumbing --------------------------------------------------------

    def _next_id(self) -> str:
        self._counter += 1
        return f"req-{self._counter}"

    def _roundtrip(self, op: str, batch: np.ndarray, labels=None) -> dict:
        with self._lock:
            request_id = self._next_id()
            try:
                write_frame(self._conn.writer, make_request(request_id, op, batch, labels))
            except (OSError, ValueError) as exc:
                raise OracleUnavailable(f"oracle connection lost: {exc}") from exc
            while request_id not in self._pending:
                try:
                    response = read_frame(self._conn.reader)
                except socket.timeout as exc:
                    raise OracleTimeout(f"no answer within {self.timeout}s") from exc
                except OSError as exc:
                    raise OracleUnavailable(f"oracle connection lost: {exc}") from exc
                if response is None:
                    raise OracleUnavailable("oracle closed the connection")
                rid = response.get("request_id")
                if not isinstance(rid, str):
                    raise ShapeMismatch("response lacks a request_id")
                self._pending[rid] = response
            response = self._pending.pop(request_id)
        if response.get("status") != "ok":
            error = response.get("error") or {}
            code = error.get("code", ERR_INTERNAL)
            message = error.get("message", "unspecified oracle error")
            if code == ERR_SHAPE_MISMATCH:
                raise ShapeMismatch(message)
            if code == ERR_UNAVAILABLE:
                raise OracleUnavailable(message)
            raise OracleUnavailable(f"oracle error {code}: {message}")
        return response

    # -- oracle interface ----------------------------------------------------------

    def predict(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch)
        outputs = []
        for start in range(0, len(batch), MAX_BATCH):
            chunk = batch[start : start + MAX_BATCH]
            response = self._roundtrip(OP_PREDICT, chunk)
            logits = response.get("logits")
            if not isinstance(logits, list) or len(logits) != len(chunk):
                raise ShapeMismatch("response logits do not match the batch")
            outputs.append(np.asarray(logits, dtype=np.float64))
        if not outputs:
            return np.zeros((0, 0))
        return np.concatenate(outputs)

    def grad_loss_input(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch)
        labels = np.asarray(labels)
        outputs = []
        for start in range(0, len(batch), MAX_BATCH):
            chunk = batch[start : start + MAX_BATCH]
            chunk_labels = labels[start : start + MAX_BATCH]
            response = self._roundtrip(OP_GRAD, chunk, chunk_labels)
            records = response.get("gradients")
            if not isinstance(records, list) or len(records) != len(chunk):
                raise ShapeMismatch("response gradients do not match the batch")
            grads = np.stack([decode_tensor(r) for r in records]) if records else (
                np.zeros_like(chunk)
            )
            if grads.shape != chunk.shape:
                raise ShapeMismatch(
                    f"gradient shape {grads.shape} != batch shape {chunk.shape}"
                )
            outputs.append(grads)
        if not outputs:
            return np.zeros_like(batch)
        return np.concatenate(outputs)


def resolve_oracle(address: str, builtin_factory=None):
    """Turn an oracle address into an oracle object.

    Addresses: ``builtin`` (requires a factory that fits/loads the reference
    classifier), ``tcp:<host>:<port>``, or ``exec:<command>``.
    """
    if address == "builtin":
        if builtin_factory is None:
            raise OracleUnavailable("no builtin oracle available in this context")
        return builtin_factory()
    if address.startswith("tcp:"):
        rest = address[len("tcp:") :]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise OracleUnavailable(f"bad tcp address {address!r}")
        return RemoteOracle.connect_tcp(host, int(port))
    if address.startswith("exec:"):
        return RemoteOracle.connect_exec(address[len("exec:") :])
    raise OracleUnavailable(f"unknown oracle address {address!r}")
