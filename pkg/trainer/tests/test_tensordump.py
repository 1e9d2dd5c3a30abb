import hashlib
import struct

import numpy as np
import pytest

from trainharness.tensordump import TensorDump, read_dump, write_dump


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dump = TensorDump(
        rng.standard_normal((5, 3, 4, 4)).astype(np.float32),
        rng.integers(0, 7, 5).astype(np.int64),
        7, 2, mu=120.5, sigma=63.25, stats_domain=0,
    )
    path = tmp_path / "d.rtd"
    write_dump(dump, path)
    loaded = read_dump(path)
    np.testing.assert_array_equal(loaded.images, dump.images)
    np.testing.assert_array_equal(loaded.labels, dump.labels)
    assert loaded.num_classes == 7 and loaded.domain == 2
    assert loaded.mu == 120.5 and loaded.sigma == 63.25 and loaded.stats_domain == 0


def test_reads_handcrafted_bytes_per_documented_layout(tmp_path):
    # one 1x2x2 standardized image, label 3, stats (1.5, 2.0, raw-byte)
    pixels = np.array([0.5, -0.5, 1.0, 2.0], dtype="<f4")
    body = b"RTDUMP\x00"
    body += struct.pack("<IIIIIBBH", 1, 1, 1, 2, 2, 2, 1, 5)
    body += struct.pack("<ddB", 1.5, 2.0, 0)
    body += pixels.tobytes()
    body += np.array([3], dtype="<u2").tobytes()
    path = tmp_path / "hand.rtd"
    path.write_bytes(body + hashlib.sha256(body).digest())
    dump = read_dump(path)
    np.testing.assert_array_equal(dump.images.reshape(-1), pixels)
    assert dump.labels.tolist() == [3]
    assert (dump.num_classes, dump.domain) == (5, 2)
    assert (dump.mu, dump.sigma, dump.stats_domain) == (1.5, 2.0, 0)


def test_corruption_detected(tmp_path):
    dump = TensorDump(
        np.zeros((2, 1, 2, 2), dtype=np.float32), np.zeros(2, dtype=np.int64), 1, 0
    )
    path = tmp_path / "d.rtd"
    write_dump(dump, path)
    raw = bytearray(path.read_bytes())
    raw[20] ^= 0x10
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        read_dump(path)


def test_cross_component_read_of_toolkit_export(tmp_path):
    """Files written by the poisoning toolkit parse identically here."""
    stattrigger = pytest.importorskip("stattrigger")
    from stattrigger.io import save_rawtensordump
    from stattrigger.tensor import Domain, LabeledDataset, standardize

    rng = np.random.default_rng(1)
    ds = standardize(
        LabeledDataset(
            rng.integers(0, 256, (6, 3, 8, 8)).astype(np.float32),
            rng.integers(0, 3, 6), 3, Domain.RAW_BYTE,
        )
    )
    path = tmp_path / "from_toolkit.rtd"
    save_rawtensordump(ds, path)
    dump = read_dump(path)
    np.testing.assert_array_equal(dump.images, ds.images)
    np.testing.assert_array_equal(dump.labels, ds.labels)
    assert dump.mu == pytest.approx(ds.std_stats.mu)
    assert dump.sigma == pytest.approx(ds.std_stats.sigma)
    assert dump.domain == 2 and dump.stats_domain == 0


def test_cross_component_write_read_by_toolkit(tmp_path):
    stattrigger = pytest.importorskip("stattrigger")
    from stattrigger.io import load_rawtensordump

    rng = np.random.default_rng(2)
    dump = TensorDump(
        rng.standard_normal((4, 1, 4, 4)).astype(np.float32),
        rng.integers(0, 2, 4).astype(np.int64), 2, 2, mu=0.0, sigma=1.0, stats_domain=1,
    )
    path = tmp_path / "from_harness.rtd"
    write_dump(dump, path)
    ds = load_rawtensordump(path)
    np.testing.assert_array_equal(ds.images, dump.images)
    np.testing.assert_array_equal(ds.labels, dump.labels)
