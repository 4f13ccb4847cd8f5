import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from genloop import Vocabulary, UniformModel, fit_texts


@pytest.fixture
def tiny_vocab():
    return Vocabulary(("<bos>", "<eos>", "<unk>", "a", "b", "c", "d", "e"))


@pytest.fixture
def uniform8(tiny_vocab):
    return UniformModel(tiny_vocab)


@pytest.fixture
def small_model():
    corpus = [
        "a b c", "a b d", "a c d", "b c a", "c a b",
        "a b c", "b d a", "d c b", "a b e", "e a b",
    ]
    return fit_texts(corpus, order=3, discount=0.75)
