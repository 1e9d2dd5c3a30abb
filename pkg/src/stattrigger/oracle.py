"""Classifier-oracle interface and the built-in linear reference classifier.

An oracle exposes class scores and the gradient of the classification loss with
respect to the input; this is everything the clean-label poisoning path needs
from a model. The built-in oracle is a softmax-linear classifier with
closed-form gradients, deterministic and dependency-free, so the whole suite
runs without a trained network.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ShapeMismatch
from .tensor import LabeledDataset


class ClassifierOracle(Protocol):
    """Class scores and input-gradients of the per-image cross-entropy loss."""

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """(n, c, h, w) batch -> (n, num_classes) logits."""
        ...

    def grad_loss_input(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """(n, c, h, w) batch + (n,) labels -> (n, c, h, w) loss gradients.

        Each image's gradient is that of its own loss, independent of batch
        size.
        """
        ...


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-image cross-entropy of softmax(logits) against integer labels."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    return log_z - shifted[np.arange(len(labels)), labels]


@dataclass
class BuiltinLinearOracle:
    """Softmax-linear classifier: logits = W @ flat(x) + b.

    Gradients of the cross-entropy loss w.r.t. the input are available in
    closed form: (softmax(z) - onehot(y)) @ W, reshaped to the image.
    """

    weights: np.ndarray  # (num_classes, c*h*w)
    biases: np.ndarray  # (num_classes,)
    input_shape: tuple[int, int, int]

    def __post_init__(self):
        c, h, w = self.input_shape
        if self.weights.shape != (self.biases.shape[0], c * h * w):
            raise ShapeMismatch(
                f"weights {self.weights.shape} do not match input shape "
                f"{self.input_shape} and {self.biases.shape[0]} classes"
            )

    @property
    def num_classes(self) -> int:
        return self.biases.shape[0]

    @staticmethod
    def zeros(num_classes: int, input_shape: tuple[int, int, int]) -> "BuiltinLinearOracle":
        c, h, w = input_shape
        return BuiltinLinearOracle(
            np.zeros((num_classes, c * h * w)), np.zeros(num_classes), input_shape
        )

    @staticmethod
    def fit(
        ds: LabeledDataset,
        epochs: int = 200,
        learning_rate: float = 0.1,
        weight_decay: float = 1e-4,
    ) -> "BuiltinLinearOracle":
        """Deterministic full-batch gradient descent from zero initialization."""
        n = len(ds)
        x = ds.images.reshape(n, -1).astype(np.float64)
        y = ds.labels
        k = ds.num_classes
        onehot = np.eye(k)[y]
        weights = np.zeros((k, x.shape[1]))
        biases = np.zeros(k)
        for _ in range(epochs):
            probs = softmax(x @ weights.T + biases)
            err = (probs - onehot) / n
            weights -= learning_rate * (err.T @ x + weight_decay * weights)
            biases -= learning_rate * err.sum(axis=0)
        return BuiltinLinearOracle(weights, biases, ds.image_shape)

    def save(self, path) -> None:
        np.savez(
            path,
            weights=self.weights,
            biases=self.biases,
            input_shape=np.array(self.input_shape),
        )

    @staticmethod
    def load(path) -> "BuiltinLinearOracle":
        data = np.load(path)
        return BuiltinLinearOracle(
            data["weights"], data["biases"], tuple(int(s) for s in data["input_shape"])
        )

    def _flat(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4 or batch.shape[1:] != self.input_shape:
            raise ShapeMismatch(
                f"expected (n, {', '.join(map(str, self.input_shape))}) batch, "
                f"got {batch.shape}"
            )
        c, h, w = self.input_shape
        return batch.reshape(batch.shape[0], c * h * w)

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return self._flat(batch) @ self.weights.T + self.biases

    def predict_labels(self, batch: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict(batch), axis=-1)

    def loss(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return cross_entropy(self.predict(batch), np.asarray(labels))

    def grad_loss_input(self, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels)
        logits = self.predict(batch)
        if labels.shape != (logits.shape[0],):
            raise ShapeMismatch("one label per image required")
        probs = softmax(logits)
        probs[np.arange(len(labels)), labels] -= 1.0
        grads = probs @ self.weights
        return grads.reshape((len(labels),) + self.input_shape)


def accuracy(oracle: ClassifierOracle, ds: LabeledDataset) -> float:
    preds = np.argmax(oracle.predict(ds.images), axis=-1)
    return float(np.mean(preds == ds.labels))


def separable_toy_dataset(
    n_per_class: int = 40, shape: tuple[int, int, int] = (1, 4, 4), seed: int = 0
) -> LabeledDataset:
    """Two linearly separable clusters, for oracle and ascent tests."""
    from .tensor import Domain, LabeledDataset

    rng = np.random.default_rng(seed)
    c, h, w = shape
    offset = np.zeros((c, h, w))
    offset[:, : h // 2, :] = 1.5
    offset[:, h // 2 :, :] = -1.5
    a = rng.normal(0.0, 0.4, (n_per_class, c, h, w)) + offset
    b = rng.normal(0.0, 0.4, (n_per_class, c, h, w)) - offset
    images = np.concatenate([a, b]).astype(np.float32)
    labels = np.array([0] * n_per_class + [1] * n_per_class)
    return LabeledDataset(images, labels, 2, Domain.STANDARDIZED)
