"""Serve a trained model behind the classifier-oracle protocol.

Predict returns logits; grad_loss_input returns each image's own cross-entropy
gradient with respect to the input (autograd on a per-image loss sum, so
results are independent of batch size). Connections are handled one at a time;
requests within a connection are answered strictly in order.
"""

from __future__ import annotations

import socket
import sys

import numpy as np
import torch
import torch.nn.functional as F

from .frames import serve_stream
from .tensordump import TensorDump
from .train import check_data_matches, load_artifact


class ModelOracle:
    """Numpy-facing oracle over a trained torch model."""

    def __init__(self, model: torch.nn.Module, meta: dict):
        self.model = model.eval()
        self.meta = meta

    def _check(self, batch: np.ndarray) -> torch.Tensor:
        shape = tuple(self.meta["input_shape"])
        if batch.ndim != 4 or tuple(batch.shape[1:]) != shape:
            raise ValueError(f"expected (n, {shape}) batch, got {batch.shape}")
        return torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))

    def predict(self, batch: np.ndarray) -> np.ndarray:
        x = self._check(batch)
        with torch.no_grad():
            return self.model(x).double().numpy()

    def grad_loss_input(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        x = self._check(batch).requires_grad_(True)
        y = torch.from_numpy(np.asarray(labels, dtype=np.int64))
        if y.shape != (len(x),):
            raise ValueError("one label per image required")
        losses = F.cross_entropy(self.model(x), y, reduction="sum")
        (grad,) = torch.autograd.grad(losses, x)
        return grad.double().numpy()


def serve_oracle(artifact_dir, tcp: str | None = None, announce=sys.stderr) -> None:
    """Serve over stdio, or over TCP when ``tcp`` is ``host:port``."""
    model, meta = load_artifact(artifact_dir)
    oracle = ModelOracle(model, meta)
    if tcp is None:
        serve_stream(oracle, sys.stdin.buffer, sys.stdout.buffer)
        return
    host, _, port = tcp.rpartition(":")
    with socket.create_server((host or "127.0.0.1", int(port))) as server:
        print(f"oracle listening on {server.getsockname()}", file=announce, flush=True)
        while True:
            conn, _ = server.accept()
            with conn, conn.makefile("rb") as r, conn.makefile("wb") as w:
                serve_stream(oracle, r, w)


def oracle_for_dump(artifact_dir, data: TensorDump) -> ModelOracle:
    """Build an in-process oracle after checking the data matches the model."""
    model, meta = load_artifact(artifact_dir)
    check_data_matches(meta, data)
    return ModelOracle(model, meta)
