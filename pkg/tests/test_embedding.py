import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from socialmem.embedding import HashingEmbedder, cosine, tokenize
from socialmem.errors import ValidationError


def test_tokenize():
    assert tokenize("Hello, WORLD! it's_ok 42") == ["hello", "world", "it", "s", "ok", "42"]


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_unit_norm_and_deterministic(text):
    e = HashingEmbedder(48)
    v = e.embed(text)
    assert v.shape == (48,)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, HashingEmbedder(48).embed(text))


def test_case_insensitive_and_overlap():
    e = HashingEmbedder(256)
    assert np.array_equal(e.embed("Chess"), e.embed("chess"))
    assert cosine(e.embed("I like chess"), e.embed("chess is fun")) > 0
    assert cosine(e.embed("same words"), e.embed("words same")) == pytest.approx(1.0)


def test_rejects_empty_and_bad_dim():
    with pytest.raises(ValidationError):
        HashingEmbedder(8).embed("  ")
    with pytest.raises(ValidationError):
        HashingEmbedder(0)


def test_cosine_zero_vector():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
