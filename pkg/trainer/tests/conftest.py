import numpy as np
import pytest

from trainharness.tensordump import TensorDump


def synthetic_dump(n=120, num_classes=4, shape=(3, 8, 8), seed=0):
    """Classes are distinct spatial patterns plus noise: quickly learnable."""
    rng = np.random.default_rng(seed)
    c, h, w = shape
    templates = rng.normal(0.0, 1.0, (num_classes, c, h, w))
    labels = rng.integers(0, num_classes, n)
    images = templates[labels] + rng.normal(0.0, 0.3, (n, c, h, w))
    return TensorDump(
        images.astype(np.float32), labels.astype(np.int64), num_classes, 2,
        mu=0.0, sigma=1.0, stats_domain=0,
    )


@pytest.fixture(scope="session")
def toy_dump():
    return synthetic_dump()


@pytest.fixture(scope="session")
def toy_artifact(toy_dump, tmp_path_factory):
    from trainharness.config import ExperimentConfig
    from trainharness.train import train

    out = tmp_path_factory.mktemp("artifact")
    cfg = ExperimentConfig(
        epochs=15, width=8, seed=1, batch_size=16, learning_rate=0.05, hflip=False
    )
    return train(cfg, out / "model", data=toy_dump)
