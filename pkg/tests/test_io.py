import hashlib

import numpy as np
import pytest

from stattrigger.errors import CorruptRecord, LabelOutOfRange, MissingStats
from stattrigger.io import (
    DatasetFormat,
    DatasetManifest,
    export_dataset,
    load_cifar10,
    load_dataset,
    load_png_folder,
    load_rawtensordump,
    save_cifar10,
    save_png_folder,
    save_rawtensordump,
)
from stattrigger.tensor import Domain, LabeledDataset, StdStats, standardize


def byte_dataset(seed=0, n=20, num_classes=10):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, (n, 3, 32, 32)).astype(np.float32)
    labels = rng.integers(0, num_classes, n)
    return LabeledDataset(images, labels, num_classes, Domain.RAW_BYTE)


class TestCifarBinary:
    def test_write_then_read_round_trip_is_byte_identical(self, tmp_path):
        ds = byte_dataset(1)
        path = tmp_path / "batch.bin"
        save_cifar10(ds, path)
        first = path.read_bytes()
        loaded = load_cifar10(path)
        np.testing.assert_array_equal(loaded.images, ds.images)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        save_cifar10(loaded, path)
        assert path.read_bytes() == first

    def test_record_layout_label_then_channel_major_pixels(self, tmp_path):
        images = np.zeros((1, 3, 32, 32), dtype=np.float32)
        images[0, 0, 0, 0] = 10  # first red pixel
        images[0, 1, 0, 0] = 20  # first green pixel
        images[0, 2, 31, 31] = 30  # last blue pixel
        ds = LabeledDataset(images, np.array([7]), 10, Domain.RAW_BYTE)
        path = tmp_path / "one.bin"
        save_cifar10(ds, path)
        raw = path.read_bytes()
        assert len(raw) == 3073
        assert raw[0] == 7
        assert raw[1] == 10
        assert raw[1 + 1024] == 20
        assert raw[3072] == 30

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(bytes(3072))
        with pytest.raises(CorruptRecord):
            load_cifar10(path)

    def test_label_out_of_range(self, tmp_path):
        record = bytes([17]) + bytes(3072)
        path = tmp_path / "bad.bin"
        path.write_bytes(record)
        with pytest.raises(LabelOutOfRange):
            load_cifar10(path)

    def test_directory_split_loading(self, tmp_path):
        parts = []
        for i in range(1, 6):
            ds = byte_dataset(i, n=4)
            save_cifar10(ds, tmp_path / f"data_batch_{i}.bin")
            parts.append(ds)
        save_cifar10(byte_dataset(99, n=3), tmp_path / "test_batch.bin")
        train = load_cifar10(tmp_path, split="train")
        assert len(train) == 20
        np.testing.assert_array_equal(train.images[:4], parts[0].images)
        test = load_cifar10(tmp_path, split="test")
        assert len(test) == 3


class TestRawTensorDump:
    def test_lossless_round_trip(self, tmp_path):
        ds = standardize(byte_dataset(2))
        path = tmp_path / "data.rtd"
        save_rawtensordump(ds, path)
        loaded = load_rawtensordump(path)
        np.testing.assert_array_equal(loaded.images, ds.images)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        assert loaded.domain is Domain.STANDARDIZED
        assert loaded.std_stats.mu == pytest.approx(ds.std_stats.mu)
        assert loaded.std_stats.sigma == pytest.approx(ds.std_stats.sigma)
        assert loaded.std_stats.source_domain is Domain.RAW_BYTE

    def test_save_load_save_is_byte_identical(self, tmp_path):
        ds = standardize(byte_dataset(3))
        a, b = tmp_path / "a.rtd", tmp_path / "b.rtd"
        save_rawtensordump(ds, a)
        save_rawtensordump(load_rawtensordump(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_single_byte_corruption_detected(self, tmp_path):
        ds = byte_dataset(4, n=5)
        path = tmp_path / "data.rtd"
        save_rawtensordump(ds, path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0x01
        path.write_bytes(bytes(raw))
        with pytest.raises(CorruptRecord):
            load_rawtensordump(path)

    def test_not_a_dump_rejected(self, tmp_path):
        path = tmp_path / "noise.rtd"
        path.write_bytes(b"definitely not a tensor dump")
        with pytest.raises(CorruptRecord):
            load_rawtensordump(path)


class TestPngFolder:
    def test_round_trip(self, tmp_path):
        ds = byte_dataset(5, n=6)
        save_png_folder(ds, tmp_path / "imgs")
        loaded = load_png_folder(tmp_path / "imgs")
        np.testing.assert_array_equal(loaded.images, ds.images)
        np.testing.assert_array_equal(loaded.labels, ds.labels)

    def test_sixteen_bit_png_rejected(self, tmp_path):
        from PIL import Image

        folder = tmp_path / "imgs"
        folder.mkdir()
        deep = Image.fromarray(np.zeros((8, 8), dtype=np.uint16))
        deep.save(folder / "000000_0.png")
        with pytest.raises(CorruptRecord):
            load_png_folder(folder)

    def test_unlabeled_name_rejected(self, tmp_path):
        from PIL import Image

        folder = tmp_path / "imgs"
        folder.mkdir()
        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(folder / "photo.png")
        with pytest.raises(CorruptRecord):
            load_png_folder(folder)


class TestExportDataset:
    def test_standardized_default_path_is_lossless(self, tmp_path):
        ds = standardize(byte_dataset(6))
        manifest = export_dataset(ds, DatasetFormat.RAW_TENSOR_DUMP, tmp_path / "d.rtd")
        loaded = load_rawtensordump(tmp_path / "d.rtd")
        np.testing.assert_array_equal(loaded.images, ds.images)
        assert manifest.clamp_count == 0
        manifest.verify(tmp_path)

    def test_destandardize_clamps_and_counts(self, tmp_path):
        images = np.array([[-10.0, 0.0, 1.0, 30.0]], dtype=np.float32).reshape(1, 1, 2, 2)
        ds = LabeledDataset(
            images, np.array([0]), 1, Domain.STANDARDIZED,
            StdStats(128.0, 64.0, Domain.RAW_BYTE),
        )
        # de-standardized: -512, 128, 192, 2048 -> clamp catches 2 pixels
        with pytest.raises(ValueError):
            export_dataset(ds, DatasetFormat.CIFAR10_BINARY, tmp_path / "d.bin")
        manifest = export_dataset(ds, DatasetFormat.PNG_FOLDER, tmp_path / "pngs")
        assert manifest.clamp_count == 2

    def test_round_half_to_even_on_export(self, tmp_path):
        images = np.array([[0.5, 1.5, 2.5, 3.5]], dtype=np.float32).reshape(1, 1, 2, 2)
        ds = LabeledDataset(
            images, np.array([0]), 1, Domain.STANDARDIZED,
            StdStats(0.0, 1.0, Domain.RAW_BYTE),
        )
        export_dataset(ds, DatasetFormat.PNG_FOLDER, tmp_path / "pngs")
        loaded = load_png_folder(tmp_path / "pngs")
        np.testing.assert_array_equal(
            loaded.images[0, 0].reshape(-1), [0.0, 2.0, 2.0, 4.0]
        )

    def test_missing_stats_raises(self, tmp_path):
        ds = LabeledDataset(
            np.zeros((1, 1, 2, 2), dtype=np.float32), np.array([0]), 1,
            Domain.STANDARDIZED,
        )
        with pytest.raises(MissingStats):
            export_dataset(ds, DatasetFormat.PNG_FOLDER, tmp_path / "pngs")

    def test_poisoned_export_import_preserves_labels_and_flips(self, tmp_path):
        from stattrigger.plan import PlanAction
        from stattrigger.poison_ci import CiPoisonConfig, poison_clean_image

        ds = standardize(byte_dataset(7, n=100))
        poisoned, plan = poison_clean_image(
            ds, CiPoisonConfig(target_label=3, poison_ratio=0.05)
        )
        export_dataset(
            poisoned, DatasetFormat.RAW_TENSOR_DUMP, tmp_path / "p.rtd", plan
        )
        loaded = load_rawtensordump(tmp_path / "p.rtd")
        np.testing.assert_array_equal(loaded.labels, poisoned.labels)
        assert (
            hashlib.sha256(loaded.images.tobytes()).hexdigest()
            == hashlib.sha256(poisoned.images.tobytes()).hexdigest()
        )
        from stattrigger.plan import PoisonPlan

        reloaded_plan = PoisonPlan.load(tmp_path / "p.plan.json")
        assert reloaded_plan.indices(PlanAction.LABEL_FLIPPED) == plan.indices(
            PlanAction.LABEL_FLIPPED
        )

    def test_manifest_detects_corruption(self, tmp_path):
        ds = byte_dataset(8, n=5)
        manifest = export_dataset(ds, DatasetFormat.RAW_TENSOR_DUMP, tmp_path / "d.rtd")
        raw = bytearray((tmp_path / "d.rtd").read_bytes())
        raw[100] ^= 0xFF
        (tmp_path / "d.rtd").write_bytes(bytes(raw))
        with pytest.raises(CorruptRecord):
            manifest.verify(tmp_path)

    def test_manifest_round_trips(self, tmp_path):
        ds = standardize(byte_dataset(9, n=4))
        manifest = export_dataset(ds, DatasetFormat.RAW_TENSOR_DUMP, tmp_path / "d.rtd")
        loaded = DatasetManifest.load(tmp_path / "d.manifest.json")
        assert loaded == manifest


class TestLoadDataset:
    def test_sniffs_dump(self, tmp_path):
        ds = byte_dataset(10, n=3)
        save_rawtensordump(ds, tmp_path / "x.data")
        loaded = load_dataset(tmp_path / "x.data")
        np.testing.assert_array_equal(loaded.images, ds.images)

    def test_sniffs_binary_file(self, tmp_path):
        ds = byte_dataset(11, n=3)
        save_cifar10(ds, tmp_path / "x.bin")
        loaded = load_dataset(tmp_path / "x.bin")
        np.testing.assert_array_equal(loaded.images, ds.images)

    def test_sniffs_png_folder(self, tmp_path):
        ds = byte_dataset(12, n=3)
        save_png_folder(ds, tmp_path / "imgs")
        loaded = load_dataset(tmp_path / "imgs")
        np.testing.assert_array_equal(loaded.images, ds.images)
