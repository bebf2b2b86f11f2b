"""Eigenfaces (Autofaces) baseline."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# eigenvalues of the Gram matrix below this fraction of the largest are rank-deficient noise
_RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenModel:
    mean_vector: np.ndarray  # (p,)
    components: np.ndarray  # (r, p), orthonormal rows
    eigenvalues: np.ndarray  # (r,), covariance eigenvalues, divisor m - 1

    @property
    def p(self) -> int:
        return self.mean_vector.size

    @property
    def r(self) -> int:
        return self.components.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return eigen_project(self, X)


def _canonical_sign(U: np.ndarray) -> np.ndarray:
    # flip each row so its largest-magnitude coordinate is positive
    idx = np.argmax(np.abs(U), axis=1)
    signs = np.sign(U[np.arange(U.shape[0]), idx])
    signs[signs == 0] = 1.0
    return U * signs[:, None]


def eigen_fit(train: np.ndarray, max_components: int | None = None) -> EigenModel:
    """PCA of the (m, p) training rows through the m x m Gram matrix."""
    X = np.asarray(train, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("eigen_fit needs at least two training samples")
    m, p = X.shape
    mean = X.mean(axis=0)
    A = X - mean
    G = A @ A.T
    lam, V = np.linalg.eigh(G)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]

    # centering leaves residues of order eps * |x|; their Gram energy is not signal
    noise = (np.finfo(float).eps * np.abs(X).max()) ** 2 * m * p * 100
    keep = lam > max(lam[0] * _RANK_RTOL, noise)
    rank = min(int(keep.sum()), m - 1)
    if max_components is not None:
        rank = min(rank, max_components)
    lam, V = lam[:rank], V[:, :rank]

    # A^T v / sqrt(lambda) is a unit eigenvector of the p x p scatter A^T A
    U = (A.T @ V) / np.sqrt(lam)[None, :]
    U = _canonical_sign(U.T) if rank else np.zeros((0, p))
    return EigenModel(mean, np.ascontiguousarray(U), np.clip(lam / (m - 1), 0.0, None))


def eigen_project(model: EigenModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.p:
        raise ValueError(f"sample length {x.shape[-1]} does not match p={model.p}")
    return (x - model.mean_vector) @ model.components.T


def eigen_reconstruct(model: EigenModel, f: np.ndarray) -> np.ndarray:
    return model.mean_vector + np.asarray(f) @ model.components


def save_eigen_model(model: EigenModel, path: str | os.PathLike) -> None:
    """Little-endian: u64 p, u64 r, then mean, eigenvalues, components as f64."""
    blob = struct.pack("<QQ", model.p, model.r)
    for arr in (model.mean_vector, model.eigenvalues, model.components):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(blob)


def load_eigen_model(path: str | os.PathLike) -> EigenModel:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise ValueError(f"{path}: truncated eigen model")
    p, r = struct.unpack_from("<QQ", blob)
    need = 16 + 8 * (p + r + r * p)
    if len(blob) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(blob)}")
    vals = np.frombuffer(blob, dtype="<f8", offset=16).astype(np.float64)
    mean, lam, comps = vals[:p], vals[p : p + r], vals[p + r :].reshape(r, p)
    return EigenModel(mean, comps, lam)
