"""Sample vectors and per-position pixel-vectors.

Pixels are indexed column-major everywhere: index ``j`` is the pixel at
``row = j % h``, ``col = j // h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np


@dataclass(frozen=True)
class PixelVectorSet:
    """One descriptor per pixel position, as the rows of ``vectors`` (p, dim)."""

    vectors: np.ndarray
    kind: Literal["by-value", "by-position"]
    width: int
    height: int

    def __post_init__(self):
        if self.vectors.shape[0] != self.width * self.height:
            raise ValueError(
                f"{self.vectors.shape[0]} pixel-vectors for a {self.width}x{self.height} geometry"
            )

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def vectorize(img: np.ndarray) -> np.ndarray:
    """Stack the columns of an (h, w) image into a length h*w vector."""
    return np.asarray(img).ravel(order="F").copy()


def devectorize(x: np.ndarray, width: int, height: int) -> np.ndarray:
    x = np.asarray(x)
    if x.size != width * height:
        raise ValueError(f"vector of length {x.size} does not fit {width}x{height}")
    return x.reshape((height, width), order="F").copy()


def position_of(j: int, height: int) -> tuple[int, int]:
    """(row, col) of sample-vector index j."""
    return j % height, j // height


def pixel_vectors_by_value(
    train: Sequence[np.ndarray] | np.ndarray, width: int, height: int
) -> PixelVectorSet:
    """Pixel-vector j holds the j-th coordinate of every training sample.

    ``train`` is an (m, p) array (or sequence) of sample vectors.
    """
    X = np.asarray(train, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need at least one training sample vector")
    if X.shape[1] != width * height:
        raise ValueError(f"sample length {X.shape[1]} does not match {width}x{height}")
    return PixelVectorSet(np.ascontiguousarray(X.T), "by-value", width, height)


def pixel_vectors_by_position(width: int, height: int) -> PixelVectorSet:
    """Integer (row, col) coordinates of every pixel, in sample-vector order.

    The pair ordering follows the ``X(row, col)`` labels of the 2x2 worked
    example, so index 1 of a 2x2 image is ``(1, 0)``.
    """
    if width < 1 or height < 1:
        raise ValueError(f"invalid geometry {width}x{height}")
    j = np.arange(width * height)
    coords = np.stack([j % height, j // height], axis=1)
    return PixelVectorSet(coords.astype(np.int64), "by-position", width, height)
