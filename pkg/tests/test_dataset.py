import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelclust.dataset import (
    DatasetError,
    load_dataset,
    resize_image,
    round_half_up,
    stratified_holdout,
)
from pixelclust.pgm import PGMError, decode_pgm, encode_pgm, read_pgm, write_pgm

from conftest import write_dataset


def test_pgm_byte_128_decodes_to_128_over_255(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n1 1\n255\n" + bytes([128]))
    assert read_pgm(path)[0, 0] == pytest.approx(0.50196078431, abs=1e-10)


def test_pgm_header_comments_and_sixteen_bit():
    raw = b"P5 # comment\n2 1\n# another\n1000\n" + bytes([0x03, 0xE8, 0x01, 0xF4])
    samples, maxval = decode_pgm(raw)
    assert maxval == 1000
    assert samples.tolist() == [[1000, 500]]


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    for maxval in (255, 4095):
        img = rng.integers(0, maxval + 1, size=(5, 3))
        samples, mv = decode_pgm(encode_pgm(img, maxval))
        assert mv == maxval and np.array_equal(samples, img)
    write_pgm(tmp_path / "x.pgm", img / 4095, 4095)
    assert np.allclose(read_pgm(tmp_path / "x.pgm"), img / 4095)


@pytest.mark.parametrize(
    "raw",
    [b"P2\n1 1\n255\n0", b"P5\n1 1\n", b"P5\nx 1\n255\n\0", b"P5\n2 2\n255\n\0\0", b"P5\n1 1\n100\n\xff"],
)
def test_pgm_rejects_malformed(raw):
    with pytest.raises(PGMError):
        decode_pgm(raw)


def test_load_dataset_labels_and_normalization(faces_dir, faces):
    images, labels = faces
    ds = load_dataset(faces_dir)
    assert len(ds) == len(images)
    assert ds.class_names == ("s00", "s01", "s02", "s03")
    assert ds.class_count == 4
    assert (ds.width, ds.height) == (8, 10)
    assert np.array_equal(ds.labels, labels)
    assert np.allclose(ds.images, images / 255.0)
    assert ds.images.min() >= 0 and ds.images.max() <= 1
    assert len(ds.checksum) == 64


def test_load_orl_shaped_dataset(tmp_path):
    images = np.zeros((400, 112, 92), dtype=np.int64)
    labels = np.repeat(np.arange(40), 10)
    ds = load_dataset(write_dataset(tmp_path / "orl", images, labels))
    assert len(ds) == 400 and ds.class_count == 40
    assert (ds.width, ds.height) == (92, 112)


def test_single_black_image(tmp_path):
    ds = load_dataset(write_dataset(tmp_path / "d", np.zeros((1, 3, 4), np.int64), [0]))
    assert len(ds) == 1 and np.all(ds.images == 0.0)


def test_mixed_sizes_need_resize(tmp_path):
    root = tmp_path / "d"
    (root / "a").mkdir(parents=True)
    (root / "a" / "1.pgm").write_bytes(encode_pgm(np.zeros((4, 4), np.int64)))
    (root / "a" / "2.pgm").write_bytes(encode_pgm(np.zeros((5, 4), np.int64)))
    with pytest.raises(DatasetError, match="2.pgm"):
        load_dataset(root)
    ds = load_dataset(root, size=(3, 2))
    assert ds.images.shape == (2, 2, 3)


def test_bad_file_is_named(tmp_path):
    root = tmp_path / "d"
    (root / "a").mkdir(parents=True)
    (root / "a" / "bad.pgm").write_bytes(b"P5\n3 3\n255\n")
    with pytest.raises(DatasetError, match="bad.pgm"):
        load_dataset(root)


def test_vectors_are_column_major(faces_dir):
    ds = load_dataset(faces_dir)
    v = ds.vectors([0])[0]
    img = ds.images[0]
    j = 13
    assert v[j] == img[j % ds.height, j // ds.height]


# ---------------------------------------------------------------- resize


def _bilinear_oracle(img, tw, th):
    # scalar evaluation at half-pixel-aligned sample points, clamped
    h, w = img.shape
    out = np.empty((th, tw))
    for r in range(th):
        for c in range(tw):
            y = min(max((r + 0.5) * h / th - 0.5, 0), h - 1)
            x = min(max((c + 0.5) * w / tw - 0.5, 0), w - 1)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = y - y0, x - x0
            top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
            out[r, c] = top * (1 - fy) + bot * fy
    return out


def test_resize_two_columns_to_one():
    img = np.array([[0.0, 1.0], [0.0, 1.0]])
    out = resize_image(img, 1, 2)
    assert out.shape == (2, 1)
    assert np.allclose(out, [[0.5], [0.5]])
    assert np.allclose(out, _bilinear_oracle(img, 1, 2))


def test_resize_identity_is_bit_exact():
    img = np.random.default_rng(0).random((112, 92))
    assert np.array_equal(resize_image(img, 92, 112), img)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 9), st.integers(1, 9), st.integers(1, 9), st.integers(1, 9),
    st.integers(0, 2**31),
)
def test_resize_matches_scalar_oracle(h, w, th, tw, seed):
    img = np.random.default_rng(seed).random((h, w))
    out = resize_image(img, tw, th)
    assert out.shape == (th, tw)
    assert np.allclose(out, _bilinear_oracle(img, tw, th), atol=1e-12)
    assert out.min() >= 0 and out.max() <= 1


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.floats(0, 1))
def test_resize_constant(h, w, th, tw, c):
    out = resize_image(np.full((h, w), c), tw, th)
    assert np.allclose(out, c, atol=1e-12, rtol=0)


def test_resize_rejects_zero():
    with pytest.raises(DatasetError):
        resize_image(np.zeros((2, 2)), 0, 2)


# ---------------------------------------------------------------- holdout


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 5.5, 2.49)] == [1, 2, 3, 6, 2]


def test_orl_shaped_split_is_five_five():
    labels = np.repeat(np.arange(40), 10)
    split = stratified_holdout(labels, 0.5, seed=3)
    assert np.all(np.bincount(labels[split.train_indices]) == 5)
    assert np.all(np.bincount(labels[split.test_indices]) == 5)


def test_eleven_samples_round_up():
    split = stratified_holdout(np.zeros(11, int), 0.5, seed=0)
    assert len(split.train_indices) == 6 and len(split.test_indices) == 5


def test_split_determinism():
    labels = np.repeat(np.arange(5), 7)
    a = stratified_holdout(labels, 0.5, seed=9)
    b = stratified_holdout(labels, 0.5, seed=9)
    assert np.array_equal(a.train_indices, b.train_indices)
    c = stratified_holdout(labels, 0.5, seed=10)
    assert not np.array_equal(a.train_indices, c.train_indices)


def test_split_rejects_singleton_class():
    with pytest.raises(DatasetError):
        stratified_holdout(np.array([0, 0, 1]), 0.5, seed=0)


def test_split_rejects_bad_fraction():
    with pytest.raises(DatasetError):
        stratified_holdout(np.array([0, 0]), 1.0, seed=0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(2, 12), min_size=1, max_size=8),
    st.sampled_from([0.3, 0.5, 0.7]),
    st.integers(0, 2**32 - 1),
)
def test_split_properties(counts, fraction, seed):
    labels = np.repeat(np.arange(len(counts)), counts)
    split = stratified_holdout(labels, fraction, seed=seed)
    tr, te = set(split.train_indices.tolist()), set(split.test_indices.tolist())
    assert not tr & te
    assert len(tr) + len(te) == len(labels)
    per_class = np.bincount(labels[split.train_indices], minlength=len(counts))
    assert per_class.tolist() == [round_half_up(fraction * n) for n in counts]
