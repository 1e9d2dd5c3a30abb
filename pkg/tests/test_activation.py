import numpy as np
import pytest

from stattrigger.activation import (
    ActivationParams,
    Direction,
    apply_standardization,
    apply_transform,
    activate_to_threshold,
    suppress_below_threshold,
    _escalation_schedule,
)
from stattrigger.errors import ActivationFailed, SuppressionFailed, ZeroSigma
from stattrigger.features import StatFeatureConfig, stat_value, stat_values, threshold_from_ratio
from stattrigger.tensor import Domain, ImageTensor, StdStats

CFG = StatFeatureConfig()


def img(pixels, domain=Domain.STANDARDIZED):
    return ImageTensor(np.asarray(pixels, dtype=np.float64), domain)


class TestApplyTransform:
    def test_lambda_zero_is_identity(self):
        rng = np.random.default_rng(0)
        image = img(rng.standard_normal((3, 5, 5)))
        out = apply_transform(image, ActivationParams(gamma=3.0, lam=0.0))
        np.testing.assert_array_equal(out.pixels, image.pixels)

    def test_power_fixed_points(self):
        image = img(np.array([0.0, 1.0]).reshape(1, 1, 2))
        out = apply_transform(image, ActivationParams(gamma=2.0, lam=1.0))
        np.testing.assert_allclose(out.pixels.reshape(-1), [0.0, 1.0])

    def test_hand_computed_blend(self):
        # pixels {1, 3}: shifted {0, 2}; gamma 2, lambda .5
        # -> {.5*0 + .5*1, .5*4 + .5*3} = {0.5, 3.5}
        image = img(np.array([1.0, 3.0]).reshape(1, 1, 2))
        out = apply_transform(image, ActivationParams(gamma=2.0, lam=0.5))
        np.testing.assert_allclose(out.pixels.reshape(-1), [0.5, 3.5])

    def test_shape_preserving_and_deterministic(self):
        rng = np.random.default_rng(1)
        image = img(rng.standard_normal((3, 7, 4)))
        p = ActivationParams(gamma=6.0, lam=0.1)
        a = apply_transform(image, p)
        b = apply_transform(image, p)
        assert a.shape == image.shape
        np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_per_channel_minimum_used(self):
        # channel 0 min is 1, channel 1 min is 10; full replacement, gamma 1
        pixels = np.array([[[1.0, 2.0]], [[10.0, 14.0]]])
        out = apply_transform(img(pixels), ActivationParams(gamma=1.000001, lam=1.0))
        np.testing.assert_allclose(
            out.pixels, np.array([[[0.0, 1.0]], [[0.0, 4.0]]]), atol=1e-4
        )

    def test_raises_statistic_on_natural_images(self, std_train):
        p = ActivationParams(gamma=6.0, lam=0.1)
        idx = range(0, 200)
        before = stat_values(std_train.images[list(idx)], CFG)
        after = np.array(
            [stat_value(apply_transform(std_train.image(i), p), CFG) for i in idx]
        )
        assert np.median(after) > np.median(before)
        assert np.mean(after > before) >= 0.95

    def test_param_validation(self):
        with pytest.raises(ValueError):
            ActivationParams(gamma=0.5, direction=Direction.INCREASE)
        with pytest.raises(ValueError):
            ActivationParams(gamma=2.0, direction=Direction.DECREASE)
        with pytest.raises(ValueError):
            ActivationParams(gamma=2.0, lam=1.5)


class TestEscalationSchedule:
    def test_gamma_growth_and_lambda_kickin(self):
        p = ActivationParams(gamma=6.0, lam=0.1, max_escalations=6)
        seq = list(_escalation_schedule(p, 1.25))
        gammas = [g for g, _ in seq]
        np.testing.assert_allclose(
            gammas, [6.0 * 1.25**i for i in range(7)], rtol=1e-12
        )
        # lambda stays put until gamma crosses 12, then grows 1.5x capped at 1
        lams = [l for _, l in seq]
        assert lams[:4] == [0.1] * 4  # gamma 6, 7.5, 9.375, 11.72
        assert lams[4] == pytest.approx(0.15)  # gamma 14.65 crossed 12
        assert max(lams) <= 1.0

    def test_shrink_schedule(self):
        p = ActivationParams(
            gamma=0.7, lam=1.0, direction=Direction.DECREASE, max_escalations=3
        )
        gammas = [g for g, _ in _escalation_schedule(p, 0.8)]
        np.testing.assert_allclose(gammas, [0.7, 0.56, 0.448, 0.3584], rtol=1e-12)


class TestActivateToThreshold:
    def test_easy_image_single_application(self, std_train):
        image = std_train.image(0)
        th = stat_value(image, CFG) * 0.5  # already above before transform
        p = ActivationParams(gamma=6.0, lam=0.1, target_threshold=th)
        out, log = activate_to_threshold(image, p, CFG)
        assert log.succeeded and log.rounds == 0
        assert stat_value(out, CFG) >= th

    def test_constant_image_fails(self):
        image = img(np.zeros((3, 4, 4)))
        p = ActivationParams(gamma=6.0, lam=0.1, target_threshold=5.0, max_escalations=3)
        with pytest.raises(ActivationFailed) as err:
            activate_to_threshold(image, p, CFG)
        assert err.value.log is not None
        assert len(err.value.log.attempts) == 4

    def test_requires_threshold(self):
        with pytest.raises(ValueError):
            activate_to_threshold(
                img(np.zeros((1, 2, 2))), ActivationParams(gamma=2.0, lam=0.1), CFG
            )

    def test_postcondition_over_random_natural_images(self, std_train):
        th = threshold_from_ratio(std_train, CFG, 0.01)
        p = ActivationParams(gamma=6.0, lam=0.1, target_threshold=th)
        rng = np.random.default_rng(9)
        for i in rng.choice(len(std_train), size=60, replace=False):
            out, log = activate_to_threshold(std_train.image(int(i)), p, CFG)
            assert log.succeeded
            assert stat_value(out, CFG) >= th


class TestSuppressBelowThreshold:
    def decrease_params(self, th, max_escalations=8):
        return ActivationParams(
            gamma=0.7, lam=1.0, target_threshold=th,
            direction=Direction.DECREASE, max_escalations=max_escalations,
        )

    def test_already_below_returned_unchanged(self, std_train):
        image = std_train.image(0)
        th = stat_value(image, CFG) + 1.0
        out, log = suppress_below_threshold(image, self.decrease_params(th), CFG)
        assert log.succeeded and len(log.attempts) == 0
        np.testing.assert_array_equal(out.pixels, image.pixels)

    def test_statistic_decreases_each_round(self, std_train):
        values = stat_values(std_train.images, CFG)
        hot = int(np.argmax(values))
        image = std_train.image(hot)
        # unreachable threshold forces a full escalation trace
        p = self.decrease_params(1e-9, max_escalations=4)
        with pytest.raises(SuppressionFailed) as err:
            suppress_below_threshold(image, p, CFG)
        trace = [a.stat_value for a in err.value.log.attempts]
        assert all(b < a for a, b in zip(trace, trace[1:]))
        assert trace[0] < values[hot]

    def test_suppresses_hot_images(self, std_train):
        values = stat_values(std_train.images, CFG)
        th = float(np.percentile(values, 90))
        hot_indices = np.argsort(values)[-20:]
        for i in hot_indices:
            out, log = suppress_below_threshold(
                std_train.image(int(i)), self.decrease_params(th), CFG
            )
            assert stat_value(out, CFG) < th

    def test_zero_threshold_impossible(self):
        rng = np.random.default_rng(2)
        image = img(rng.standard_normal((1, 4, 4)))
        with pytest.raises(SuppressionFailed):
            suppress_below_threshold(image, self.decrease_params(0.0, 3), CFG)


class TestApplyStandardization:
    def test_identity_stats(self):
        rng = np.random.default_rng(4)
        image = img(rng.standard_normal((1, 3, 3)))
        out = apply_standardization(image, StdStats(0.0, 1.0, Domain.UNIT))
        np.testing.assert_array_equal(out.pixels, image.pixels)

    def test_centering(self):
        image = img(np.full((1, 2, 2), 128.0), Domain.RAW_BYTE)
        out = apply_standardization(image, StdStats(128.0, 64.0, Domain.RAW_BYTE))
        np.testing.assert_array_equal(out.pixels, np.zeros((1, 2, 2)))

    def test_zero_sigma_rejected(self):
        image = img(np.zeros((1, 2, 2)))
        with pytest.raises(ZeroSigma):
            apply_standardization(image, StdStats(0.0, 0.0, Domain.UNIT))

    def test_inflates_variance_over_mean_on_bright_unit_images(self, corpus):
        """For unit-domain images brighter than the dataset mean, the trigger
        strictly raises the variance-over-mean statistic (sigma < 1 shrinks the
        denominator faster than the numerator)."""
        from stattrigger.features import Variant
        from stattrigger.tensor import LabeledDataset, standardize, grayscale_grid

        train, _, _ = corpus
        unit = LabeledDataset(
            train.images / 255.0, train.labels, train.num_classes, Domain.UNIT
        )
        stats = standardize(unit).std_stats
        cv = StatFeatureConfig(variant=Variant.VARIANCE_OVER_MEAN)
        means = grayscale_grid(unit.images).reshape(len(unit), -1).mean(axis=1)
        bright = np.where(means > stats.mu + 0.05)[0][:50]
        assert len(bright) > 0
        for i in bright:
            image = unit.image(int(i))
            before = stat_value(image, cv)
            after = stat_value(apply_standardization(image, stats), cv)
            assert after > before
