"""Region projection matrices: one mean-intensity feature per pixel cluster."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .clustering import KMeansConfig, Partition, kmeans
from .pgm import encode_pgm
from .pixelspace import devectorize, pixel_vectors_by_value


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """Sparse n x p matrix whose row k averages the pixels in ``supports[k]``.

    ``fill_value`` is what reconstruction writes into pixels that belong to no
    retained region; fitted models set it to the training mean intensity.
    """

    supports: tuple[np.ndarray, ...]
    width: int
    height: int
    fill_value: float = 0.0

    def __post_init__(self):
        for s in self.supports:
            if s.size == 0:
                raise ProjectionError("projection row with empty support")
            s.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.supports)

    @property
    def p(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.p

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        sizes = np.array([s.size for s in self.supports])
        indptr = np.concatenate([[0], np.cumsum(sizes)])
        indices = np.concatenate(self.supports) if self.supports else np.empty(0, np.int64)
        data = np.repeat(1.0 / sizes, sizes)
        return sp.csr_matrix((data, indices, indptr), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def with_fill(self, fill_value: float) -> "ProjectionMatrix":
        return ProjectionMatrix(self.supports, self.width, self.height, float(fill_value))


@dataclass(frozen=True)
class SelectionPlan:
    clusters_formed: int
    features_kept: int
    variance_ranking: tuple[int, ...]
    kept_rows: tuple[int, ...]

    @property
    def surplus(self) -> int:
        return self.clusters_formed - self.features_kept


def build_projection(part: Partition) -> ProjectionMatrix:
    supports = part.clusters()
    for k, s in enumerate(supports):
        if s.size == 0:
            raise ProjectionError(f"cluster {k} is empty")
    return ProjectionMatrix(tuple(supports), part.width, part.height)


def project(W: ProjectionMatrix, x: np.ndarray) -> np.ndarray:
    """Features of one sample vector (p,) or of a batch (m, p)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.p:
        raise ProjectionError(f"sample length {x.shape[-1]} does not match p={W.p}")
    if x.ndim == 1:
        return W.matrix @ x
    return np.asarray((W.matrix @ x.T).T)


def feature_variances(features: np.ndarray) -> np.ndarray:
    """Unbiased per-feature variance over training feature vectors (rows)."""
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 2:
        raise ProjectionError("need at least two feature vectors of equal length")
    return F.var(axis=0, ddof=1)


def variance_ranking(variances: np.ndarray) -> np.ndarray:
    """Row indices by descending variance; ties go to the lower index."""
    v = np.asarray(variances, dtype=np.float64)
    return np.lexsort((np.arange(v.size), -v))


def select_top_variance(
    W: ProjectionMatrix, variances: np.ndarray, keep: int
) -> tuple[ProjectionMatrix, SelectionPlan]:
    if keep < 1:
        raise ProjectionError("must keep at least one feature")
    if keep > W.n:
        raise ProjectionError(f"cannot keep {keep} of {W.n} features")
    if len(variances) != W.n:
        raise ProjectionError("one variance per projection row is required")
    ranking = variance_ranking(variances)
    kept = np.sort(ranking[:keep])
    plan = SelectionPlan(W.n, keep, tuple(ranking.tolist()), tuple(kept.tolist()))
    W_kept = ProjectionMatrix(
        tuple(W.supports[k] for k in kept), W.width, W.height, W.fill_value
    )
    return W_kept, plan


def reconstruct(W: ProjectionMatrix, f: np.ndarray, fill: float | None = None) -> np.ndarray:
    """Paint each region with its feature value; uncovered pixels get the fill."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (W.n,):
        raise ProjectionError(f"expected {W.n} features, got shape {f.shape}")
    x_hat = np.full(W.p, W.fill_value if fill is None else fill, dtype=np.float64)
    for k, s in enumerate(W.supports):
        x_hat[s] = f[k]
    return x_hat


def representation_error(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared pixel difference."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ProjectionError("shape mismatch")
    return float(np.mean((x - x_hat) ** 2))


def region_map(part: Partition) -> np.ndarray:
    """(h, w) grid of cluster ids."""
    return devectorize(part.assignment, part.width, part.height)


def region_map_pgm(part: Partition) -> bytes:
    maxval = 255 if part.n <= 256 else 65535
    grid = region_map(part)
    if part.n > 1:
        grid = (grid * maxval) // (part.n - 1)
    return encode_pgm(grid, maxval)


@dataclass(frozen=True)
class PVModel:
    """A fitted Pedacos-por-Valor extractor."""

    partition: Partition
    projection: ProjectionMatrix
    plan: SelectionPlan | None = field(default=None)

    @property
    def n_features(self) -> int:
        return self.projection.n

    def transform(self, X: np.ndarray) -> np.ndarray:
        return project(self.projection, X)


def fit_pedacos_por_valor(
    train: np.ndarray,
    width: int,
    height: int,
    n_features: int,
    clusters_formed: int | None = None,
    seed: int = 0,
    max_iterations: int = 300,
    tolerance: float = 1e-6,
    restarts: int = 1,
    workers: int = 1,
) -> PVModel:
    """Cluster the by-value pixel-vectors of ``train`` (m, p) and build W.

    With ``clusters_formed`` > ``n_features``, that many clusters are formed
    and only the ``n_features`` highest-variance region features are kept.
    """
    train = np.asarray(train, dtype=np.float64)
    formed = n_features if clusters_formed is None else clusters_formed
    if formed < n_features:
        raise ProjectionError("clusters_formed must be >= n_features")
    cfg = KMeansConfig(formed, seed, max_iterations, tolerance, restarts)
    part = kmeans(pixel_vectors_by_value(train, width, height), cfg, workers=workers)
    W = build_projection(part).with_fill(float(train.mean()))
    plan = None
    if formed > n_features:
        W, plan = select_top_variance(W, feature_variances(project(W, train)), n_features)
    return PVModel(part, W, plan)


def save_model(W: ProjectionMatrix, path: str | os.PathLike) -> None:
    lines = [f"{W.width} {W.height} {W.n} {W.p}", f"# fill {W.fill_value!r}"]
    for s in W.supports:
        lines.append(" ".join(map(str, [s.size, *s.tolist()])))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | os.PathLike) -> ProjectionMatrix:
    text = Path(path).read_text().split("\n")
    fill = 0.0
    rows = []
    for line in text:
        if line.startswith("# fill "):
            fill = float(line[7:])
        elif line.strip() and not line.startswith("#"):
            rows.append(line)
    try:
        width, height, n, p = (int(t) for t in rows[0].split())
        supports = []
        for line in rows[1:]:
            vals = np.array(line.split(), dtype=np.int64)
            if vals[0] != vals.size - 1:
                raise ValueError(f"row declares {vals[0]} members, lists {vals.size - 1}")
            supports.append(vals[1:])
    except (ValueError, IndexError) as exc:
        raise ProjectionError(f"{path}: malformed model file ({exc})") from None
    if p != width * height or len(supports) != n:
        raise ProjectionError(f"{path}: header does not match body")
    seen = np.concatenate(supports) if supports else np.empty(0, np.int64)
    if seen.size and (seen.min() < 0 or seen.max() >= p or np.unique(seen).size != seen.size):
        raise ProjectionError(f"{path}: supports overlap or fall outside the image")
    return ProjectionMatrix(tuple(supports), width, height, fill)
