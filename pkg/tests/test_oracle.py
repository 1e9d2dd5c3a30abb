import numpy as np
import pytest

from stattrigger.errors import ShapeMismatch
from stattrigger.oracle import (
    BuiltinLinearOracle,
    accuracy,
    cross_entropy,
    separable_toy_dataset,
    softmax,
)


class TestZeroOracle:
    def test_uniform_logits_and_first_class_argmax(self):
        oracle = BuiltinLinearOracle.zeros(4, (1, 2, 2))
        batch = np.random.default_rng(0).standard_normal((5, 1, 2, 2))
        logits = oracle.predict(batch)
        np.testing.assert_array_equal(logits, np.zeros((5, 4)))
        assert np.all(oracle.predict_labels(batch) == 0)

    def test_zero_weights_zero_gradient(self):
        oracle = BuiltinLinearOracle.zeros(3, (1, 2, 2))
        batch = np.ones((2, 1, 2, 2))
        grads = oracle.grad_loss_input(batch, np.array([0, 2]))
        np.testing.assert_array_equal(grads, np.zeros_like(batch))

    def test_empty_batch(self):
        oracle = BuiltinLinearOracle.zeros(3, (1, 2, 2))
        assert oracle.predict(np.zeros((0, 1, 2, 2))).shape == (0, 3)
        grads = oracle.grad_loss_input(np.zeros((0, 1, 2, 2)), np.zeros(0, dtype=int))
        assert grads.shape == (0, 1, 2, 2)


class TestFittedOracle:
    def test_perfect_accuracy_on_separable_toy_data(self):
        ds = separable_toy_dataset(seed=1)
        oracle = BuiltinLinearOracle.fit(ds)
        assert accuracy(oracle, ds) == 1.0

    def test_fit_is_deterministic(self):
        ds = separable_toy_dataset(seed=2)
        a = BuiltinLinearOracle.fit(ds, epochs=50)
        b = BuiltinLinearOracle.fit(ds, epochs=50)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.biases, b.biases)

    def test_gradient_matches_central_finite_differences(self):
        ds = separable_toy_dataset(seed=3)
        oracle = BuiltinLinearOracle.fit(ds, epochs=50)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1,) + ds.image_shape)
        label = np.array([1])
        analytic = oracle.grad_loss_input(x, label)[0]
        eps = 1e-6
        numeric = np.zeros_like(analytic)
        flat = x.copy()
        for idx in np.ndindex(analytic.shape):
            plus = flat.copy()
            minus = flat.copy()
            plus[(0,) + idx] += eps
            minus[(0,) + idx] -= eps
            numeric[idx] = (
                oracle.loss(plus, label)[0] - oracle.loss(minus, label)[0]
            ) / (2 * eps)
        scale = np.maximum(np.abs(numeric), 1e-8)
        assert float(np.max(np.abs(analytic - numeric) / scale)) < 1e-4

    def test_shape_mismatch_rejected(self):
        oracle = BuiltinLinearOracle.zeros(2, (1, 4, 4))
        with pytest.raises(ShapeMismatch):
            oracle.predict(np.zeros((1, 1, 3, 3)))
        with pytest.raises(ShapeMismatch):
            oracle.grad_loss_input(np.zeros((2, 1, 4, 4)), np.array([0]))

    def test_save_load_round_trip(self, tmp_path):
        ds = separable_toy_dataset(seed=5)
        oracle = BuiltinLinearOracle.fit(ds, epochs=20)
        path = tmp_path / "oracle.npz"
        oracle.save(path)
        loaded = BuiltinLinearOracle.load(path)
        np.testing.assert_array_equal(loaded.weights, oracle.weights)
        batch = ds.images[:4]
        np.testing.assert_array_equal(loaded.predict(batch), oracle.predict(batch))


class TestLossHelpers:
    def test_softmax_rows_sum_to_one(self):
        z = np.random.default_rng(6).standard_normal((7, 5)) * 30
        p = softmax(z)
        np.testing.assert_allclose(p.sum(axis=1), np.ones(7), rtol=1e-12)

    def test_cross_entropy_of_confident_correct_prediction(self):
        logits = np.array([[50.0, 0.0, 0.0]])
        assert cross_entropy(logits, np.array([0]))[0] == pytest.approx(0.0, abs=1e-12)
