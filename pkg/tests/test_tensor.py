import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stattrigger.errors import EmptyDataset, ZeroVariance
from stattrigger.tensor import (
    Domain,
    ImageTensor,
    LabeledDataset,
    standardize,
    to_grayscale,
)


def make_image(pixels, domain=Domain.STANDARDIZED):
    return ImageTensor(np.asarray(pixels, dtype=np.float64), domain)


class TestImageTensor:
    def test_shape_properties(self):
        img = make_image(np.zeros((3, 4, 5)))
        assert (img.channels, img.height, img.width) == (3, 4, 5)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            make_image(np.zeros((4, 5)))

    def test_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            make_image(np.full((1, 2, 2), 256.0), Domain.RAW_BYTE)
        with pytest.raises(ValueError):
            make_image(np.full((1, 2, 2), -0.1), Domain.UNIT)

    def test_pixels_read_only(self):
        img = make_image(np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 1.0


class TestGrayscale:
    def test_channel_mean(self):
        img = make_image(np.array([0.3, 0.6, 0.9]).reshape(3, 1, 1))
        assert to_grayscale(img)[0, 0] == pytest.approx(0.6)

    def test_single_channel_identity(self):
        pixels = np.arange(12, dtype=np.float64).reshape(1, 3, 4)
        img = make_image(pixels)
        np.testing.assert_array_equal(to_grayscale(img), pixels[0])

    def test_ones_and_zeros_average_to_half(self):
        pixels = np.stack([np.ones((2, 2)), np.zeros((2, 2))])
        img = make_image(pixels)
        np.testing.assert_array_equal(to_grayscale(img), np.full((2, 2), 0.5))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_commutes_with_spatial_permutation(self, seed):
        rng = np.random.default_rng(seed)
        pixels = rng.standard_normal((3, 4, 6))
        perm = rng.permutation(24)
        gray_then_perm = to_grayscale(make_image(pixels)).reshape(-1)[perm]
        permuted = pixels.reshape(3, -1)[:, perm].reshape(3, 4, 6)
        perm_then_gray = to_grayscale(make_image(permuted)).reshape(-1)
        np.testing.assert_array_equal(gray_then_perm, perm_then_gray)


def make_dataset(images, labels, num_classes=10, domain=Domain.RAW_BYTE):
    return LabeledDataset(np.asarray(images), np.asarray(labels), num_classes, domain)


class TestLabeledDataset:
    def test_label_range_checked(self):
        with pytest.raises(ValueError):
            make_dataset(np.zeros((2, 1, 2, 2)), [0, 10])

    def test_item_access(self):
        ds = make_dataset(np.zeros((3, 1, 2, 2)), [4, 5, 6])
        img, label = ds[1]
        assert label == 5
        assert img.domain is Domain.RAW_BYTE

    def test_std_stats_rejected_on_raw_dataset(self):
        from stattrigger.tensor import StdStats

        with pytest.raises(ValueError):
            LabeledDataset(
                np.zeros((1, 1, 2, 2)), np.array([0]), 1, Domain.RAW_BYTE,
                StdStats(0.0, 1.0, Domain.RAW_BYTE),
            )


class TestStandardize:
    def test_two_pixel_example(self):
        ds = make_dataset(np.array([0.0, 2.0]).reshape(1, 1, 1, 2), [0])
        out = standardize(ds)
        np.testing.assert_allclose(out.images.reshape(-1), [-1.0, 1.0])
        assert out.domain is Domain.STANDARDIZED
        assert out.std_stats.mu == pytest.approx(1.0)
        assert out.std_stats.sigma == pytest.approx(1.0)
        assert out.std_stats.source_domain is Domain.RAW_BYTE

    def test_constant_dataset_rejected(self):
        ds = make_dataset(np.full((2, 1, 2, 2), 7.0), [0, 1])
        with pytest.raises(ZeroVariance):
            standardize(ds)

    def test_empty_rejected(self):
        ds = make_dataset(np.zeros((0, 1, 2, 2)), [])
        with pytest.raises(EmptyDataset):
            standardize(ds)

    def test_population_statistics_after_transform(self, corpus):
        train, _, _ = corpus
        out = standardize(train)
        flat = out.images.reshape(-1).astype(np.float64)
        assert abs(flat.mean()) < 1e-6
        assert abs(flat.std() - 1.0) < 1e-6

    def test_second_pass_is_numerical_noop(self, std_train):
        again = standardize(std_train)
        assert abs(again.std_stats.mu) < 1e-5
        assert abs(again.std_stats.sigma - 1.0) < 1e-5
        scale = np.abs(std_train.images) + 1.0
        rel = np.abs(again.images - std_train.images) / scale
        assert float(rel.max()) < 1e-5
