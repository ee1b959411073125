import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlign.embeddings import (
    EmbeddingSpace,
    MultiDictionary,
    SeedDictionary,
    dumps_vec,
    load_dictionary,
    loads_vec,
    parse_vec,
)
from xlign.errors import DataError


def space(words, cols):
    return EmbeddingSpace(tuple(words), np.array(cols, dtype=float).T)


def test_parse_minimal():
    s = loads_vec("2 3\na 1 0 0\nb 0 1 0\n")
    assert s.vocab == ("a", "b")
    assert s.dim == 3 and s.n == 2
    np.testing.assert_array_equal(s.matrix, [[1, 0], [0, 1], [0, 0]])


def test_parse_dimension_mismatch_names_line():
    with pytest.raises(DataError, match="line 2"):
        loads_vec("2 3\na 1 0\nb 0 1 0\n")


@pytest.mark.parametrize(
    "text",
    ["", "2\na 1\n", "x 3\na 1 2 3\n", "1 2 3\na 1 2\n"],
    ids=["empty", "one-field", "non-integer", "three-fields"],
)
def test_parse_malformed_header(text):
    with pytest.raises(DataError):
        loads_vec(text)


def test_parse_non_finite():
    with pytest.raises(DataError, match="non-finite"):
        loads_vec("1 2\na nan 1\n")
    with pytest.raises(DataError, match="non-finite"):
        loads_vec("1 2\na 1 inf\n")


def test_parse_non_numeric():
    with pytest.raises(DataError, match="non-numeric"):
        loads_vec("1 2\na 1 x\n")


def test_parse_empty_vocabulary():
    with pytest.raises(DataError):
        loads_vec("0 3\n")


def test_parse_row_count_mismatch():
    with pytest.raises(DataError):
        loads_vec("3 2\na 1 2\nb 3 4\n")
    with pytest.raises(DataError):
        loads_vec("1 2\na 1 2\nb 3 4\n")


def test_duplicate_words_keep_first(caplog):
    with caplog.at_level(logging.WARNING):
        s = loads_vec("3 2\na 1 2\nb 3 4\na 5 6\n")
    assert s.vocab == ("a", "b")
    np.testing.assert_array_equal(s.vector("a"), [1, 2])
    assert "duplicate" in caplog.text


def test_tokens_may_contain_any_non_whitespace():
    s = loads_vec("2 2\n少女 1 2\n<a,b>! 3 4\n")
    assert s.vocab == ("少女", "<a,b>!")


def test_fasttext_trailing_space():
    s = loads_vec("1 2\nword 0.5 -0.25 \n")
    np.testing.assert_array_equal(s.vector("word"), [0.5, -0.25])


def test_max_vocab_truncates():
    s = loads_vec("3 1\na 1\nb 2\nc 3\n", max_vocab=2)
    assert s.vocab == ("a", "b")


def test_float32_values_are_widened():
    s = loads_vec("1 1\na 0.1\n")
    assert s.matrix.dtype == np.float64
    assert s.matrix[0, 0] == 0.1


def test_write_one_word():
    assert dumps_vec(space(["a"], [(1, 2, 3)])) == "1 3\na 1 2 3\n"


def test_empty_space_rejected():
    with pytest.raises(DataError):
        EmbeddingSpace((), np.zeros((3, 0)))


def test_space_invariants():
    with pytest.raises(DataError, match="duplicate"):
        EmbeddingSpace(("a", "a"), np.eye(2))
    with pytest.raises(DataError, match="non-finite"):
        EmbeddingSpace(("a", "b"), np.array([[1.0, np.nan], [0, 1]]))
    with pytest.raises(DataError):
        EmbeddingSpace(("a",), np.eye(2))


def test_space_is_immutable():
    s = space(["a"], [(1, 2)])
    with pytest.raises(ValueError):
        s.matrix[0, 0] = 5


def test_random_space_round_trip_exact():
    rng = np.random.default_rng(0)
    s = EmbeddingSpace(tuple(f"w{i}" for i in range(100)), rng.standard_normal((50, 100)))
    back = loads_vec(dumps_vec(s))
    assert back.vocab == s.vocab
    np.testing.assert_array_equal(back.matrix, s.matrix)


words = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Zs", "Zl", "Zp", "Cc")), min_size=1, max_size=6
).filter(lambda w: w.split() == [w])
values = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_round_trip_property(data):
    vocab = data.draw(st.lists(words, min_size=1, max_size=8, unique=True))
    d = data.draw(st.integers(1, 6))
    flat = data.draw(st.lists(values, min_size=d * len(vocab), max_size=d * len(vocab)))
    s = EmbeddingSpace(tuple(vocab), np.array(flat).reshape(d, len(vocab)))
    back = loads_vec(dumps_vec(s))
    assert back.vocab == s.vocab
    np.testing.assert_allclose(back.matrix, s.matrix, rtol=1e-12, atol=0)
    assert back.matrix.shape == (d, len(vocab))


# --------------------------------------------------------------------------
# dictionaries


@pytest.fixture
def pair_spaces():
    src = space(["cat", "dog", "bank"], np.eye(3))
    tgt = space(["gato", "perro", "banco", "orilla"], np.eye(3, 4).T)
    return src, tgt


def test_dictionary_basic(pair_spaces):
    seed, multi, skipped = load_dictionary(io.StringIO("cat gato\ndog perro\n"), *pair_spaces)
    assert seed.pairs == ((0, 0), (1, 1))
    assert skipped == 0
    assert multi.entries == {0: frozenset({0}), 1: frozenset({1})}


def test_dictionary_oov_skipped(pair_spaces):
    seed, multi, skipped = load_dictionary(io.StringIO("cat gatito\n"), *pair_spaces)
    assert len(seed) == 0 and len(multi) == 0 and skipped == 1


def test_dictionary_multiple_targets(pair_spaces):
    _, multi, _ = load_dictionary(io.StringIO("bank banco\nbank orilla\n"), *pair_spaces)
    assert multi.entries[2] == frozenset({2, 3})


def test_dictionary_bad_line(pair_spaces):
    with pytest.raises(DataError, match="line 2"):
        load_dictionary(io.StringIO("cat gato\nlonely\n"), *pair_spaces)


def test_dictionary_tabs_and_blank_lines(pair_spaces):
    seed, _, _ = load_dictionary(io.StringIO("cat\tgato\n\n  dog   perro  \n"), *pair_spaces)
    assert seed.pairs == ((0, 0), (1, 1))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=20))
def test_dictionary_indices_in_range(pairs):
    src = space([f"s{i}" for i in range(4)], np.eye(4))
    tgt = space([f"t{i}" for i in range(3)], np.eye(3))
    text = "".join(f"s{i} t{j}\n" for i, j in pairs)
    seed, multi, skipped = load_dictionary(io.StringIO(text), src, tgt)
    i, j = seed.arrays()
    assert np.all((0 <= i) & (i < 4)) and np.all((0 <= j) & (j < 3))
    assert len(seed) + skipped == len(pairs)
    seed.check_bounds(src.n, tgt.n)


def test_seed_unique_sorted():
    d = SeedDictionary(((2, 1), (0, 0), (2, 1)))
    assert d.unique().pairs == ((0, 0), (2, 1))


def test_check_bounds():
    with pytest.raises(DataError):
        SeedDictionary(((0, 5),)).check_bounds(3, 3)


def test_multi_requires_nonempty_targets():
    with pytest.raises(DataError):
        MultiDictionary({0: frozenset()})
