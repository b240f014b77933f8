import json

import pytest
from hypothesis import given, strategies as st

from markovmouth.lexicon import (
    MASK_TOKEN,
    LexiconError,
    MaskedSequence,
    OOVError,
    Vocabulary,
    build_vocabulary,
    decode,
    encode,
)


def test_build_vocabulary_counts():
    v = build_vocabulary(["a b", "a c"], min_count=1)
    assert list(v.tokens) == ["a", "b", "c"]
    assert v.size == 3


def test_build_vocabulary_min_count_filters():
    v = build_vocabulary(["a b", "a c"], min_count=2)
    assert list(v.tokens) == ["a"]
    assert v.size == 1


def test_build_vocabulary_lowercases():
    v = build_vocabulary(["A b"], casing="lower")
    assert "a" in v.tokens and "A" not in v.tokens


def test_build_vocabulary_empty_after_filter():
    with pytest.raises(LexiconError):
        build_vocabulary(["a b"], min_count=5)


def test_build_vocabulary_frequency_then_lexicographic():
    v = build_vocabulary(["b b c a a a", "c"], min_count=1)
    # a:3, then b and c tied at 2 -> lexicographic
    assert list(v.tokens) == ["a", "b", "c"]


def test_reserved_ids_sit_above_vocab():
    v = Vocabulary(tokens=("a", "b", "c"))
    assert v.mask_id == 3 and v.cls_id == 4 and v.sep_id == 5
    assert v.token_of(v.mask_id) == MASK_TOKEN


def test_encode_basic():
    v = Vocabulary(tokens=("a", "b", "c"))
    assert encode("a b a", v) == (0, 1, 0)


def test_encode_empty_rejected():
    v = Vocabulary(tokens=("a",))
    with pytest.raises(LexiconError):
        encode("", v)


def test_encode_oov_names_token_and_position():
    v = Vocabulary(tokens=("a", "b", "c"))
    with pytest.raises(OOVError, match=r"'z'.*position 2"):
        encode("a z", v)


def test_encode_oov_mask_mode():
    v = Vocabulary(tokens=("a", "b", "c"))
    assert encode("a z", v, oov="mask") == (0, v.mask_id)


def test_decode_basic():
    v = Vocabulary(tokens=("a", "b", "c"))
    assert decode((0, 1, 0), v) == "a b a"


def test_decode_reserved_rendering():
    v = Vocabulary(tokens=("a",))
    assert decode((v.mask_id,), v) == MASK_TOKEN


def test_decode_invalid_id():
    v = Vocabulary(tokens=("a",))
    with pytest.raises(LexiconError):
        decode((99,), v)


@given(st.lists(st.sampled_from(["a", "b", "c", "dd"]), min_size=1, max_size=30))
def test_round_trip_random_sentences(tokens):
    v = Vocabulary(tokens=("a", "b", "c", "dd"))
    text = " ".join(tokens)
    assert decode(encode(text, v), v) == text


def test_vocabulary_serialization_deterministic():
    v1 = build_vocabulary(["a b", "a c"], min_count=1)
    v2 = build_vocabulary(["a b", "a c"], min_count=1)
    assert v1.to_json() == v2.to_json()
    assert json.loads(v1.to_json())["tokens"] == ["a", "b", "c"]


def test_vocabulary_json_round_trip():
    v = build_vocabulary(["x y z"], casing="lower")
    assert Vocabulary.from_json(v.to_json()) == v


def test_masked_sequence_invariant():
    v = Vocabulary(tokens=("a", "b"))
    ms = MaskedSequence.mask((0, 1), 1, v)
    assert ms.ids == (0, v.mask_id)
    with pytest.raises(LexiconError):
        MaskedSequence(ids=(0, 1), position=1, mask_id=v.mask_id)


def test_reserved_symbols_not_allowed_in_vocab():
    with pytest.raises(LexiconError):
        Vocabulary(tokens=("a", MASK_TOKEN))
