"""Imbalanced dataset construction: long-tailed / step profiles,
synthetic Gaussian tasks, and IDX-format ingestion.

Classes are always re-indexed so that per-class counts are
non-increasing: class 0 is the most major class.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import RngState

__all__ = ["Dataset", "longtail_counts", "step_counts", "subsample_to_profile",
           "synth_gaussian", "read_idx"]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray   # [N, d] float64
    labels: np.ndarray     # [N] int
    counts: np.ndarray     # [C] per-class sizes, non-increasing

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        actual = np.bincount(self.labels, minlength=len(self.counts))
        if not np.array_equal(actual, self.counts):
            raise ValueError(f"counts {self.counts.tolist()} do not match labels {actual.tolist()}")
        if np.any(np.diff(self.counts) > 0):
            raise ValueError(f"counts must be non-increasing: {self.counts.tolist()}")

    @property
    def num_classes(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return len(self.labels)

    def fingerprint(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def _reindex_by_size(features: np.ndarray, labels: np.ndarray, num_classes: int) -> Dataset:
    """Relabel classes so counts are non-increasing; ties keep original order."""
    counts = np.bincount(labels, minlength=num_classes)
    order = np.lexsort((np.arange(num_classes), -counts))
    remap = np.empty(num_classes, dtype=np.int64)
    remap[order] = np.arange(num_classes)
    return Dataset(features, remap[labels], counts[order])


def longtail_counts(n_max: int, rho: float, C: int) -> np.ndarray:
    """Exponentially decayed class sizes from n_max down to ~n_max/rho."""
    if rho < 1 or C < 2 or n_max < 1:
        raise ValueError(f"need rho >= 1, C >= 2, n_max >= 1; got {rho}, {C}, {n_max}")
    c = np.arange(C)
    counts = np.round(n_max * rho ** (-c / (C - 1)))
    return np.maximum(counts, 1).astype(np.int64)


def step_counts(n_max: int, rho: float, C: int) -> np.ndarray:
    """First ceil(C/2) classes get n_max, the rest n_max/rho."""
    if rho < 1 or C < 2 or n_max < 1:
        raise ValueError(f"need rho >= 1, C >= 2, n_max >= 1; got {rho}, {C}, {n_max}")
    majors = (C + 1) // 2
    minor = max(1, round(n_max / rho))
    return np.array([n_max] * majors + [minor] * (C - majors), dtype=np.int64)


def subsample_to_profile(full: Dataset, counts: np.ndarray, rng: RngState) -> Dataset:
    """Per-class uniform without-replacement subsample to the given counts."""
    counts = np.asarray(counts, dtype=np.int64)
    if len(counts) != full.num_classes:
        raise ValueError(f"profile has {len(counts)} classes, dataset has {full.num_classes}")
    gen = rng.generator()
    keep = []
    for c in range(full.num_classes):
        idx = np.flatnonzero(full.labels == c)
        if counts[c] > len(idx):
            raise ValueError(f"class {c}: requested {counts[c]} but only {len(idx)} available")
        keep.append(gen.choice(idx, size=counts[c], replace=False))
    keep = np.concatenate(keep)
    return _reindex_by_size(full.features[keep], full.labels[keep], full.num_classes)


def _class_means(C: int, dim: int, separation: float) -> np.ndarray:
    """Class means at separation * unit directions evenly spaced on a circle."""
    if dim < 2:
        raise ValueError("synthetic task needs dim >= 2")
    angles = 2.0 * np.pi * np.arange(C) / C
    means = np.zeros((C, dim))
    means[:, 0] = np.cos(angles)
    means[:, 1] = np.sin(angles)
    return separation * means


def synth_gaussian(C: int, dim: int, class_separation: float, noise_sigma: float,
                   counts: np.ndarray, rng: RngState,
                   test_per_class: int = 200) -> tuple[Dataset, Dataset]:
    """Isotropic Gaussian classes with means on evenly spaced directions.

    Returns an imbalanced train set with the requested per-class counts
    and a balanced test set drawn from the same distributions.
    """
    if C < 2:
        raise ValueError(f"need C >= 2, got {C}")
    counts = np.asarray(counts, dtype=np.int64)
    if len(counts) != C or np.any(counts < 1):
        raise ValueError(f"counts must be {C} positive integers: {counts.tolist()}")
    if np.any(np.diff(counts) > 0):
        raise ValueError(f"counts must be non-increasing: {counts.tolist()}")
    means = _class_means(C, dim, class_separation)
    gen = rng.generator()

    def draw(per_class):
        feats, labels = [], []
        for c in range(C):
            feats.append(means[c] + noise_sigma * gen.standard_normal((per_class[c], dim)))
            labels.append(np.full(per_class[c], c, dtype=np.int64))
        return Dataset(np.concatenate(feats), np.concatenate(labels), np.asarray(per_class))

    train = draw(counts)
    test = draw(np.full(C, test_per_class, dtype=np.int64))
    return train, test


def _read_be32(f, path: Path, what: str) -> int:
    data = f.read(4)
    if len(data) != 4:
        raise ValueError(f"{path}: truncated while reading {what}")
    return struct.unpack(">i", data)[0]


def read_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Read an IDX image/label file pair into a dataset.

    Pixels are flattened row-major and scaled to [0, 1]; classes are
    re-indexed by decreasing size.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic = _read_be32(f, images_path, "magic")
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(f"{images_path}: bad images magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        n = _read_be32(f, images_path, "image count")
        rows = _read_be32(f, images_path, "rows")
        cols = _read_be32(f, images_path, "cols")
        raw = f.read(n * rows * cols)
        if len(raw) != n * rows * cols:
            raise ValueError(f"{images_path}: truncated pixel data ({len(raw)} of {n * rows * cols} bytes)")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    with open(labels_path, "rb") as f:
        magic = _read_be32(f, labels_path, "magic")
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(f"{labels_path}: bad labels magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        n_labels = _read_be32(f, labels_path, "label count")
        if n_labels != n:
            raise ValueError(f"label count {n_labels} does not match image count {n}")
        raw = f.read(n_labels)
        if len(raw) != n_labels:
            raise ValueError(f"{labels_path}: truncated label data")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    num_classes = int(labels.max()) + 1 if n else 0
    return _reindex_by_size(images.astype(np.float64) / 255.0, labels, num_classes)
