import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pixelclust.pixelspace import (
    devectorize,
    pixel_vectors_by_position,
    pixel_vectors_by_value,
    position_of,
    vectorize,
)

X1 = np.array([[4, 6], [1, 3]])
X2 = np.array([[5, 9], [2, 7]])


def test_vectorize_worked_example():
    assert vectorize(X1).tolist() == [4, 1, 6, 3]
    assert vectorize(X2).tolist() == [5, 2, 9, 7]
    assert vectorize(np.array([[0.25]])).tolist() == [0.25]


def test_by_value_worked_example():
    pv = pixel_vectors_by_value([vectorize(X1), vectorize(X2)], 2, 2)
    assert pv.kind == "by-value" and pv.dim == 2 and len(pv) == 4
    assert pv.vectors.tolist() == [[4, 5], [1, 2], [6, 9], [3, 7]]


def test_by_value_single_image():
    x = np.arange(6.0)
    pv = pixel_vectors_by_value(x[None, :], 3, 2)
    assert pv.vectors.shape == (6, 1)
    assert pv.vectors[:, 0].tolist() == x.tolist()


def test_by_value_orl_geometry():
    rng = np.random.default_rng(0)
    imgs = rng.random((8, 112, 92))
    train = np.stack([vectorize(im) for im in imgs])
    pv = pixel_vectors_by_value(train, 92, 112)
    assert pv.vectors.shape == (10304, 8)
    row, col = 18, 23
    j = col * 112 + row
    assert position_of(j, 112) == (row, col)
    assert pv.vectors[j].tolist() == imgs[:, row, col].tolist()


def test_by_value_rejects_empty_and_mismatch():
    with pytest.raises(ValueError):
        pixel_vectors_by_value(np.empty((0, 4)), 2, 2)
    with pytest.raises(ValueError):
        pixel_vectors_by_value(np.zeros((2, 5)), 2, 2)


def test_by_position_two_by_two():
    pv = pixel_vectors_by_position(2, 2)
    assert [tuple(v) for v in pv.vectors.tolist()] == [(0, 0), (1, 0), (0, 1), (1, 1)]
    assert pixel_vectors_by_position(1, 1).vectors.tolist() == [[0, 0]]


def test_by_position_three_by_two():
    pv = pixel_vectors_by_position(3, 2)
    assert len(pv) == 6 and pv.dim == 2
    # enumerated by hand: j=3 -> row 3 % 2 = 1, col 3 // 2 = 1
    assert tuple(pv.vectors[3]) == (1, 1)
    assert [tuple(v) for v in pv.vectors.tolist()] == [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2)]


@given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=st.floats(0, 1)))
def test_round_trip(img):
    h, w = img.shape
    assert np.array_equal(devectorize(vectorize(img), w, h), img)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 1000))
def test_transpose_relation(m, w, h, seed):
    train = np.random.default_rng(seed).random((m, w * h))
    pv = pixel_vectors_by_value(train, w, h)
    assert len(pv) == w * h
    for i in range(m):
        for j in range(w * h):
            assert pv.vectors[j, i] == train[i, j]
