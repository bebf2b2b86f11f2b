"""Labeled grayscale image collections: loading, resizing and holdout splits."""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pgm import PGMError, read_pgm

PGM_SUFFIXES = (".pgm",)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Images stacked as an (N, h, w) float array with integer labels.

    Labels index `class_names`, which are the class directory names in
    lexicographic order.
    """

    images: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    files: tuple[str, ...] = ()
    checksum: str = ""
    root: str = ""

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DatasetError("images must be an (N, h, w) array")
        if len(self.images) != len(self.labels):
            raise DatasetError("images and labels differ in length")
        present = set(np.unique(self.labels).tolist())
        if present != set(range(len(self.class_names))):
            raise DatasetError("every class needs at least one sample")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.images)

    def vectors(self, indices=None) -> np.ndarray:
        """Column-stacked sample vectors, one row per image."""
        imgs = self.images if indices is None else self.images[np.asarray(indices)]
        # column-major stacking == C-order ravel of the transpose
        return np.ascontiguousarray(imgs.transpose(0, 2, 1)).reshape(len(imgs), -1)


@dataclass(frozen=True)
class HoldoutSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int | None = None
    train_fraction: float = 0.5


def _read_image(path: Path, fmt: str) -> np.ndarray:
    if fmt == "pgm":
        return read_pgm(path)
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64)
                return arr / 65535.0
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetError(f"{path}: unreadable image ({exc})") from None


def load_dataset(
    root: str | os.PathLike,
    format: str = "pgm",
    size: tuple[int, int] | None = None,
) -> LabeledDataset:
    """Load `<root>/<class>/<image>` files.

    `format` is "pgm" (native P5 decoder) or any file suffix Pillow can read,
    e.g. "gif" or "png". `size` is an optional (width, height) resize target;
    without it, all images must already share one geometry.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    fmt = format.lower().lstrip(".")
    suffixes = PGM_SUFFIXES if fmt == "pgm" else (f".{fmt}",)

    class_dirs = sorted(
        (d for d in root.iterdir() if d.is_dir() and not d.name.startswith(".")),
        key=lambda d: d.name,
    )
    if not class_dirs:
        raise DatasetError(f"{root}: no class subdirectories")

    images, labels, files = [], [], []
    digest = hashlib.sha256()
    shape = None
    for label, cdir in enumerate(class_dirs):
        paths = sorted(p for p in cdir.iterdir() if p.is_file() and p.suffix.lower() in suffixes)
        if not paths:
            raise DatasetError(f"{cdir}: no .{fmt} files")
        for path in paths:
            try:
                img = _read_image(path, fmt)
            except PGMError as exc:
                raise DatasetError(str(exc)) from None
            if size is not None:
                img = resize_image(img, size[0], size[1])
            elif shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DatasetError(
                    f"{path}: size {img.shape[1]}x{img.shape[0]} differs from "
                    f"{shape[1]}x{shape[0]}; pass a resize target"
                )
            rel = path.relative_to(root).as_posix()
            digest.update(rel.encode())
            digest.update(path.read_bytes())
            images.append(img)
            labels.append(label)
            files.append(rel)

    return LabeledDataset(
        images=np.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=tuple(d.name for d in class_dirs),
        files=tuple(files),
        checksum=digest.hexdigest(),
        root=str(root),
    )


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centre alignment, coordinates clamped to the valid range
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_image(img: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Bilinear resize with edge clamping."""
    if target_w < 1 or target_h < 1:
        raise DatasetError(f"invalid target size {target_w}x{target_h}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (target_h, target_w):
        return img.copy()
    r0, r1, fr = _bilinear_axis(h, target_h)
    c0, c1, fc = _bilinear_axis(w, target_w)
    rows = img[r0] * (1.0 - fr)[:, None] + img[r1] * fr[:, None]
    out = rows[:, c0] * (1.0 - fc)[None, :] + rows[:, c1] * fc[None, :]
    return np.clip(out, 0.0, 1.0)


def round_half_up(x: float) -> int:
    # guard against 0.5 landing a hair below due to binary representation
    return math.floor(x + 0.5 + 1e-9)


def stratified_holdout(
    labels: np.ndarray | LabeledDataset,
    train_fraction: float = 0.5,
    seed: int | None = 0,
    rng: np.random.Generator | None = None,
) -> HoldoutSplit:
    """Per class, draw round_half_up(fraction * n_c) samples for training.

    Pass either a seed or an explicit generator (the seed is then only
    recorded).
    """
    if isinstance(labels, LabeledDataset):
        labels = labels.labels
    labels = np.asarray(labels)
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if rng is None:
        rng = np.random.default_rng(seed)

    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            raise DatasetError(f"class {c} has a single sample; cannot stratify")
        k = round_half_up(train_fraction * len(idx))
        perm = rng.permutation(len(idx))
        train.append(idx[perm[:k]])
        test.append(idx[perm[k:]])
    return HoldoutSplit(
        train_indices=np.sort(np.concatenate(train)),
        test_indices=np.sort(np.concatenate(test)),
        seed=seed,
        train_fraction=train_fraction,
    )
