import numpy as np
import pytest

from stattrigger.corpus import reference_corpus
from stattrigger.tensor import standardize


@pytest.fixture(scope="session")
def corpus():
    """(train, test, description) natural-image corpus, raw bytes."""
    return reference_corpus(seed=0)


@pytest.fixture(scope="session")
def std_train(corpus):
    train, _, _ = corpus
    return standardize(train)


@pytest.fixture(scope="session")
def std_test(corpus, std_train):
    """Test split standardized with the train split's statistics."""
    _, test, _ = corpus
    stats = std_train.std_stats
    from stattrigger.tensor import Domain, LabeledDataset

    images = (test.images.astype(np.float64) - stats.mu) / stats.sigma
    return LabeledDataset(
        images.astype(np.float32), test.labels, test.num_classes,
        Domain.STANDARDIZED, stats,
    )
