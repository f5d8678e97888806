"""Datasets: the graded-scale synthetic regression and MNIST IDX files."""

from __future__ import annotations

import csv
import gzip
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyClassError, FormatError, InvalidInputError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

SYNTH_BLOCKS = 20
SYNTH_BLOCK_ROWS = 50
SYNTH_COLS = 20
SYNTH_SCALE = 15


@dataclass(frozen=True)
class Dataset:
    X: NDArray[np.float64]
    y: NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise InvalidInputError(f"X {self.X.shape} and y {self.y.shape} disagree")

    @property
    def N(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class SynthRegression:
    dataset: Dataset
    theta_true: NDArray[np.float64]
    noise: NDArray[np.float64]
    perm: NDArray[np.intp]

    def block_of_rows(self) -> NDArray[np.intp]:
        """1-based scale block (the i in Uni(-15i, 15i)) of every stored row."""
        return self.perm // SYNTH_BLOCK_ROWS + 1


def synth_regression(seed: int) -> SynthRegression:
    """1000 x 20 integer design whose i-th block of 50 rows is Uni{-15i..15i}.

    Rows are shuffled, theta_true ~ Uni[-1, 1]^20 and y = X theta_true + eps
    with standard normal eps.
    """
    rng = np.random.default_rng(seed)
    blocks = [
        rng.integers(-SYNTH_SCALE * i, SYNTH_SCALE * i, size=(SYNTH_BLOCK_ROWS, SYNTH_COLS), endpoint=True)
        for i in range(1, SYNTH_BLOCKS + 1)
    ]
    X = np.vstack(blocks).astype(np.float64)
    perm = rng.permutation(X.shape[0])
    X = X[perm]
    theta = rng.uniform(-1.0, 1.0, SYNTH_COLS)
    noise = rng.standard_normal(X.shape[0])
    y = X @ theta + noise
    return SynthRegression(Dataset(X, y, {"source": "synthetic", "seed": seed}), theta, noise, perm)


def _open(path: Path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path, magic: int, ndims: int) -> tuple[NDArray[np.uint8], tuple[int, ...], str]:
    with _open(path) as fh:
        raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    header = 4 + 4 * ndims
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for magic number", len(raw))
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}", 0)
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header", len(raw))
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise FormatError(f"{path}: truncated payload, expected {size} bytes", len(raw))
    data = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return data, dims, digest


def read_idx_images(path) -> tuple[NDArray[np.uint8], str]:
    data, dims, digest = _read_idx(path, IMAGE_MAGIC, 3)
    return data.reshape(dims), digest


def read_idx_labels(path) -> tuple[NDArray[np.uint8], str]:
    data, dims, digest = _read_idx(path, LABEL_MAGIC, 1)
    return data.reshape(dims), digest


def write_idx_images(path, images: NDArray[np.uint8]) -> None:
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: NDArray[np.uint8]) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, labels.size))
        fh.write(labels.tobytes())


def load_mnist(
    images_path,
    labels_path,
    classes: tuple[int, int] = (4, 9),
    limit: int | None = None,
    K: int | None = None,
) -> Dataset:
    """Two-class MNIST subset with pixels in [0, 1] and labels +1 / -1.

    Samples keep file order. ``limit`` truncates to the first ``limit``
    matches, and ``K`` further truncates to a multiple of K.
    """
    if limit is not None and limit <= 0:
        raise EmptyClassError("limit must be positive")
    images, img_digest = read_idx_images(images_path)
    labels, lbl_digest = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels", 4)
    for c in classes:
        if not np.any(labels == c):
            raise EmptyClassError(f"class {c} does not occur in {labels_path}")
    keep = np.flatnonzero(np.isin(labels, classes))
    if limit is not None:
        keep = keep[:limit]
    if K is not None:
        keep = keep[: (keep.size // K) * K]
    if keep.size == 0:
        raise EmptyClassError("no samples left after filtering")
    X = images[keep].reshape(keep.size, -1).astype(np.float64) / 255.0
    y = np.where(labels[keep] == classes[0], 1.0, -1.0)
    meta = {"source": "mnist", "images_sha256": img_digest, "labels_sha256": lbl_digest, "classes": tuple(classes)}
    return Dataset(X, y, meta)


def to_csv(dataset: Dataset, path) -> None:
    p = dataset.X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{j}" for j in range(p)] + ["y"])
        for row, target in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def from_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path} is empty")
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    if header[-1] != "y":
        raise InvalidInputError(f"{path}: last column must be y")
    return Dataset(body[:, :-1], body[:, -1], {"source": "csv", "path": str(path)})
