import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kelp.matrix_io import (BinaryMatrix, EmbeddingTable, EntryMask, FormatError,
                            load_binary_matrix, load_embeddings, load_mask,
                            sample_holdout_mask, save_binary_matrix, save_embeddings, save_mask)


def write(tmp_path, text, name="f.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_matrix_lists_ones(tmp_path):
    Y = load_binary_matrix(write(tmp_path, "2 2\n0 0\n1 1"))
    assert Y.shape == (2, 2)
    assert Y.ones == {(0, 0), (1, 1)}
    assert np.array_equal(Y.to_dense(), np.eye(2))


def test_load_matrix_header_only_is_all_zero(tmp_path):
    Y = load_binary_matrix(write(tmp_path, "1 3"))
    assert Y.shape == (1, 3) and Y.nnz == 0
    assert not Y.to_dense().any()


@pytest.mark.parametrize("text, msg", [
    ("2 2\n0 5", "out of range"),
    ("2\n0 0", "header"),
    ("2 2\n0 0\n0 0", "duplicate"),
    ("2 2\n0 x", "non-integer"),
    ("a b\n", "non-integer"),
    ("", "empty"),
])
def test_load_matrix_errors(tmp_path, text, msg):
    with pytest.raises(FormatError, match=msg):
        load_binary_matrix(write(tmp_path, text))


def test_load_embeddings(tmp_path):
    E = load_embeddings(write(tmp_path, "1,0\n0,1"))
    assert (E.p, E.d) == (2, 2)
    assert np.array_equal(E.values[0], [1.0, 0.0])
    E = load_embeddings(write(tmp_path, "1,2,3"))
    assert (E.p, E.d) == (1, 3)


@pytest.mark.parametrize("text, msg", [("1,2\n3", "ragged"), ("1,a", "non-numeric"), ("\n", "empty")])
def test_load_embeddings_errors(tmp_path, text, msg):
    with pytest.raises(FormatError, match=msg):
        load_embeddings(write(tmp_path, text))


def test_bit_lookup():
    Y = BinaryMatrix(3, 4, [0, 2], [3, 1])
    assert Y[0, 3] == 1 and Y[2, 1] == 1 and Y[1, 1] == 0
    with pytest.raises(IndexError):
        Y[3, 0]


def test_types_are_immutable():
    Y = BinaryMatrix(2, 2, [0], [1])
    with pytest.raises(ValueError):
        Y.rows[0] = 1
    E = EmbeddingTable(np.ones((2, 2)))
    with pytest.raises(ValueError):
        E.values[0, 0] = 3.0


def test_embedding_rejects_nonfinite():
    with pytest.raises(ValueError):
        EmbeddingTable(np.array([[1.0, np.nan]]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 6), st.integers(1, 6))))
def test_matrix_round_trip(tmp_path_factory, dense):
    path = tmp_path_factory.mktemp("rt") / "m.txt"
    Y = BinaryMatrix.from_dense(dense.astype(int))
    save_binary_matrix(Y, path)
    assert load_binary_matrix(path) == Y


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_embedding_round_trip_is_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "e.csv"
    E = EmbeddingTable(values)
    save_embeddings(E, path)
    back = load_embeddings(path)
    assert np.array_equal(back.values, E.values)


def test_mask_round_trip(tmp_path):
    mask = sample_holdout_mask(7, 9, 0.3, seed=4)
    save_mask(mask, tmp_path / "mask.txt")
    assert load_mask(tmp_path / "mask.txt") == mask


def test_mask_fraction_concentrates():
    mask = sample_holdout_mask(1000, 1000, 0.1, seed=123)
    assert 0.08 <= mask.size / 1e6 <= 0.12


def test_mask_determinism():
    assert sample_holdout_mask(2, 2, 0.5, 9) == sample_holdout_mask(2, 2, 0.5, 9)
    assert sample_holdout_mask(40, 30, 0.5, 1) != sample_holdout_mask(40, 30, 0.5, 2)


def test_mask_vanishing_probability_is_empty():
    assert sample_holdout_mask(10, 10, 1e-9, 0).size == 0


@pytest.mark.parametrize("pi", [0.0, 1.0, -0.2, 1.5])
def test_mask_rejects_bad_pi(pi):
    with pytest.raises(ValueError):
        sample_holdout_mask(3, 3, pi, 0)


def test_mask_marginals():
    n = p = 50
    pi, seeds = 0.3, 1000
    counts = np.zeros((n, p))
    for s in range(seeds):
        counts += sample_holdout_mask(n, p, pi, s).to_dense()
    freq = counts / seeds
    se = np.sqrt(pi * (1 - pi) / seeds)
    assert np.max(np.abs(freq - pi)) < 5 * se


def test_mask_rejects_out_of_range():
    with pytest.raises(ValueError):
        EntryMask((2, 2), [2], [0])
