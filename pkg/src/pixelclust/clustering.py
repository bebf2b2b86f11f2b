"""Seeded hard k-means over pixel-vectors."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .pixelspace import PixelVectorSet

log = logging.getLogger(__name__)

# fixed block size so results never depend on how many threads share the work
_CHUNK = 2048
# below this many distance terms per block, distances are taken by explicit differences
_EXACT_LIMIT = 4_000_000


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class KMeansConfig:
    n: int
    seed: int = 0
    max_iterations: int = 300
    tolerance: float = 1e-6
    restarts: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ClusteringError(f"cluster count must be >= 1, got {self.n}")
        if self.max_iterations < 1:
            raise ClusteringError("max_iterations must be >= 1")
        if self.tolerance < 0:
            raise ClusteringError("tolerance must be >= 0")
        if self.restarts < 1:
            raise ClusteringError("restarts must be >= 1")


@dataclass(frozen=True)
class Partition:
    """Cluster id per pixel position (column-major order) plus run diagnostics."""

    assignment: np.ndarray
    n: int
    width: int
    height: int
    wcss_history: tuple[float, ...] = field(default=(), compare=False)
    iterations: int = field(default=0, compare=False)
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (self.width * self.height,):
            raise ClusteringError(
                f"assignment length {a.size} does not match {self.width}x{self.height}"
            )
        if a.size and (a.min() < 0 or a.max() >= self.n):
            raise ClusteringError(f"cluster ids must lie in [0, {self.n})")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (
            (self.n, self.width, self.height) == (other.n, other.width, other.height)
            and np.array_equal(self.assignment, other.assignment)
        )

    @property
    def p(self) -> int:
        return self.assignment.size

    @property
    def member_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n)

    def clusters(self) -> list[np.ndarray]:
        """Sorted pixel indices of each cluster, in cluster id order."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.member_counts)[:-1]
        return np.split(order, bounds)

    def is_valid(self) -> bool:
        return bool(np.all(self.member_counts > 0))

    @classmethod
    def from_clusters(cls, clusters, width: int, height: int) -> "Partition":
        assignment = np.full(width * height, -1, dtype=np.int64)
        for k, members in enumerate(clusters):
            members = np.asarray(members, dtype=np.int64)
            if np.any(assignment[members] >= 0):
                raise ClusteringError("clusters overlap")
            assignment[members] = k
        if np.any(assignment < 0):
            raise ClusteringError("clusters do not cover every pixel")
        return cls(assignment, len(clusters), width, height)


def _as_matrix(vectors) -> tuple[np.ndarray, int, int]:
    if isinstance(vectors, PixelVectorSet):
        return np.asarray(vectors.vectors, dtype=np.float64), vectors.width, vectors.height
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X, 1, X.shape[0]


def canonical_labels(assignment: np.ndarray) -> np.ndarray:
    """Renumber clusters by their smallest member index."""
    assignment = np.asarray(assignment)
    _, first, inverse = np.unique(assignment, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


def _nearest_block(X: np.ndarray, C: np.ndarray, c_sq: np.ndarray) -> np.ndarray:
    if X.shape[0] * C.shape[0] * X.shape[1] <= _EXACT_LIMIT:
        d = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    else:
        d = (X * X).sum(axis=1)[:, None] - 2.0 * (X @ C.T) + c_sq[None, :]
    # argmin keeps the first minimum, i.e. the lowest cluster id on ties
    return np.argmin(d, axis=1)


def _assign(X: np.ndarray, C: np.ndarray, pool: ThreadPoolExecutor | None) -> np.ndarray:
    c_sq = (C * C).sum(axis=1)
    starts = range(0, X.shape[0], _CHUNK)
    if pool is None:
        parts = [_nearest_block(X[s : s + _CHUNK], C, c_sq) for s in starts]
    else:
        parts = list(pool.map(lambda s: _nearest_block(X[s : s + _CHUNK], C, c_sq), starts))
    return np.concatenate(parts)


def _centroids(X: np.ndarray, labels: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=n)
    ind = sp.csr_matrix(
        (np.ones(labels.size), (labels, np.arange(labels.size))), shape=(n, labels.size)
    )
    sums = np.asarray(ind @ X)
    with np.errstate(invalid="ignore", divide="ignore"):
        C = sums / counts[:, None]
    return C, counts


def _sq_dist_to_own(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return ((X - C[labels]) ** 2).sum(axis=1)


def _repair_empty(X: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    """Refill empty clusters by splitting the most spread-out cluster in two.

    The cluster with the largest mean squared distance to its centroid keeps
    its centroid; its farthest member seeds the empty cluster, and the
    members strictly closer to that seed move over.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=n)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        C, counts = _centroids(X, labels, n)
        d_own = _sq_dist_to_own(X, np.nan_to_num(C), labels)
        spread = np.bincount(labels, weights=d_own, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            spread = np.where(counts > 0, spread / counts, -np.inf)
        donor = int(np.argmax(spread))
        if not spread[donor] > 0:
            raise ClusteringError("cannot refill an empty cluster: no cluster has spread")
        members = np.flatnonzero(labels == donor)
        far = members[int(np.argmax(d_own[members]))]
        d_seed = ((X[members] - X[far]) ** 2).sum(axis=1)
        moving = members[d_seed < d_own[members]]
        labels[moving] = empty
        log.debug("refilled empty cluster %d from cluster %d (%d members)", empty, donor, moving.size)
        counts = np.bincount(labels, minlength=n)
    return labels


def wcss(vectors, part: Partition | np.ndarray) -> float:
    """Within-cluster sum of squared distances to the cluster means."""
    X, _, _ = _as_matrix(vectors)
    labels = part.assignment if isinstance(part, Partition) else np.asarray(part)
    if labels.shape[0] != X.shape[0]:
        raise ClusteringError("assignment length does not match vector count")
    n = int(labels.max()) + 1
    C, _ = _centroids(X, labels, n)
    return float(_sq_dist_to_own(X, np.nan_to_num(C), labels).sum())


def _lloyd(X, n, rng, cfg, pool, uniq):
    C = uniq[rng.choice(len(uniq), size=n, replace=False)]
    labels = None
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        new_labels = _assign(X, C, pool)
        new_labels = _repair_empty(X, new_labels, n)
        C_new, _ = _centroids(X, new_labels, n)
        history.append(float(_sq_dist_to_own(X, C_new, new_labels).sum()))
        unchanged = labels is not None and np.array_equal(new_labels, labels)
        shift = float(np.sqrt(((C_new - C) ** 2).sum(axis=1)).max())
        labels, C = new_labels, C_new
        if unchanged or shift < cfg.tolerance:
            converged = True
            break
    return labels, history, it, converged


def kmeans(vectors, cfg: KMeansConfig, workers: int = 1) -> Partition:
    """Lloyd iterations from n distinct seeded centroids.

    Initial centroids are drawn without replacement from the distinct
    vectors in sorted order, so the result does not depend on the order the
    pixel-vectors come in. With several restarts the lowest-WCSS run wins.
    """
    X, width, height = _as_matrix(vectors)
    p = X.shape[0]
    if cfg.n > p:
        raise ClusteringError(f"cannot form {cfg.n} clusters from {p} pixel-vectors")
    uniq = np.unique(X, axis=0)
    if cfg.n > len(uniq):
        raise ClusteringError(
            f"cannot form {cfg.n} non-empty clusters: only {len(uniq)} distinct pixel-vectors"
        )

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        best = None
        for r, ss in enumerate(streams):
            labels, history, iters, converged = _lloyd(
                X, cfg.n, np.random.default_rng(ss), cfg, pool, uniq
            )
            if not converged:
                log.info("k-means restart %d hit max_iterations=%d", r, cfg.max_iterations)
            if best is None or history[-1] < best[1][-1]:
                best = (labels, history, iters, converged)
    finally:
        if pool is not None:
            pool.shutdown()

    labels, history, iters, converged = best
    return Partition(
        canonical_labels(labels), cfg.n, width, height,
        wcss_history=tuple(history), iterations=iters, converged=converged,
    )


def save_partition(part: Partition, path: str | os.PathLike) -> None:
    lines = [f"{part.width} {part.height} {part.n}"]
    lines += [f"{j} {k}" for j, k in enumerate(part.assignment.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_partition(path: str | os.PathLike) -> Partition:
    rows = Path(path).read_text().split("\n")
    try:
        width, height, n = (int(t) for t in rows[0].split())
        body = np.array([r.split() for r in rows[1:] if r.strip()], dtype=np.int64)
    except ValueError as exc:
        raise ClusteringError(f"{path}: malformed partition file ({exc})") from None
    p = width * height
    if body.shape != (p, 2):
        raise ClusteringError(f"{path}: expected {p} 'pixel cluster' lines")
    assignment = np.full(p, -1, dtype=np.int64)
    assignment[body[:, 0]] = body[:, 1]
    part = Partition(assignment, n, width, height)
    if not part.is_valid():
        raise ClusteringError(f"{path}: partition has empty clusters")
    return part
