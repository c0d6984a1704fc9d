import numpy as np
import pytest

from speakervq.corpus import generate_synthetic_corpus, load_corpus
from speakervq.frontend import FrontendConfig


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus3")
    return generate_synthetic_corpus(out, n_speakers=3, seed=5)


@pytest.fixture(scope="session")
def small_train_utts(small_manifest):
    return load_corpus(small_manifest, role="train")


@pytest.fixture(scope="session")
def small_test_utts(small_manifest):
    return load_corpus(small_manifest, role="test")


@pytest.fixture(scope="session")
def cfg():
    return FrontendConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
