import os
from pathlib import Path

import numpy as np
import pytest

from pixelclust.pgm import encode_pgm

_ACCEPTANCE: list[tuple[str, str, str]] = []


def make_faces(n_classes=4, per_class=6, width=8, height=10, noise=0.04, seed=0):
    """Class prototypes (smooth blobs) plus per-sample noise and brightness jitter.

    Returns integer samples in [0, 255] with shape (N, h, w) and labels.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    images, labels = [], []
    for c in range(n_classes):
        proto = np.full((height, width), 0.3)
        for _ in range(3):
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            s = rng.uniform(1.0, 3.0)
            proto += rng.uniform(-0.4, 0.6) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))
        for _ in range(per_class):
            img = proto + rng.uniform(-0.05, 0.05) + rng.normal(0, noise, proto.shape)
            images.append(np.rint(np.clip(img, 0, 1) * 255).astype(np.int64))
            labels.append(c)
    return np.stack(images), np.array(labels)


def write_dataset(root: Path, images, labels, prefix="s"):
    root.mkdir(parents=True, exist_ok=True)
    for i, (img, lab) in enumerate(zip(images, labels)):
        d = root / f"{prefix}{lab:02d}"
        d.mkdir(exist_ok=True)
        (d / f"{i:03d}.pgm").write_bytes(encode_pgm(img, 255))
    return root


@pytest.fixture
def faces():
    return make_faces()


@pytest.fixture
def faces_dir(tmp_path, faces):
    images, labels = faces
    return write_dataset(tmp_path / "faces", images, labels)


@pytest.fixture
def acceptance():
    """Record one line per acceptance criterion; printed in the terminal summary."""

    def record(criterion: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, "PASS" if ok else "FAIL", detail))
        assert ok, f"{criterion}: {detail}"

    def skip(criterion: str, reason: str):
        _ACCEPTANCE.append((criterion, "SKIP", reason))
        pytest.skip(reason)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {criterion}  {detail}")


def dataset_root(name: str) -> Path | None:
    base = os.environ.get("PIXELCLUST_DATA")
    if not base:
        return None
    root = Path(base) / name
    return root if root.is_dir() else None
