"""IDX ingestion (MNIST / Fashion-MNIST) and task construction."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class DataError(ValueError):
    pass


class IdxMagicError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class IdxCountMismatchError(DataError):
    pass


class InsufficientSamplesError(DataError):
    pass


@dataclass
class LabeledImageSet:
    images: np.ndarray  # (count, Q, P) floats in [0, 1]
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3 or len(self.images) != len(self.labels):
            raise DataError(f"images {self.images.shape} and labels {self.labels.shape} disagree")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataError(f"labels outside 0..{self.class_count - 1}")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("pixel values outside [0, 1]")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "LabeledImageSet":
        return LabeledImageSet(self.images[idx], self.labels[idx], self.class_count)


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".gz"):
        raw = gzip.decompress(raw)
    return raw


def _header(raw: bytes, path, magic: int, n_dims: int):
    need = 4 * (1 + n_dims)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: truncated at offset {len(raw)} (need 4-byte magic)")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise IdxMagicError(f"{path}: bad magic 0x{found:08x} at offset 0, expected 0x{magic:08x}")
    if len(raw) < need:
        raise IdxTruncatedError(f"{path}: truncated at offset {len(raw)} inside header of {need} bytes")
    return struct.unpack(f">{n_dims}I", raw[4:need]), need


def read_idx_images(path) -> np.ndarray:
    raw = _read(path)
    (count, rows, cols), off = _header(raw, path, IMAGE_MAGIC, 3)
    size = count * rows * cols
    if len(raw) < off + size:
        raise IdxTruncatedError(
            f"{path}: truncated at offset {len(raw)}, expected {off + size} bytes for {count} images"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=off).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _read(path)
    (count,), off = _header(raw, path, LABEL_MAGIC, 1)
    if len(raw) < off + count:
        raise IdxTruncatedError(f"{path}: truncated at offset {len(raw)}, expected {off + count} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=off)


def load_idx(images_path, labels_path, class_count: int = 10) -> LabeledImageSet:
    """Parse an IDX image/label pair; ``.gz`` files are decompressed transparently."""
    for p in (images_path, labels_path):
        if not os.path.exists(p):
            raise DataError(f"{p}: no such file")
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise IdxCountMismatchError(
            f"{images_path} holds {len(pixels)} images but {labels_path} holds {len(labels)} labels (count at offset 4)"
        )
    return LabeledImageSet(pixels / 255.0, labels.astype(np.int64), class_count)


def write_idx(images_path, labels_path, data: LabeledImageSet):
    """Write ``data`` as an IDX pair; pixels are rounded back to bytes."""
    pixels = np.rint(data.images * 255.0).astype(np.uint8)
    count, rows, cols = pixels.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IMAGE_MAGIC, count, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", LABEL_MAGIC, count))
        fh.write(data.labels.astype(np.uint8).tobytes())


def _draw(pool_by_class, counts, rng):
    picked = []
    for cls, n in counts:
        pool = pool_by_class[cls]
        if n > len(pool):
            raise InsufficientSamplesError(f"class {cls}: asked for {n}, only {len(pool)} available")
        picked.append(pool[:n])
        pool_by_class[cls] = pool[n:]
    return np.concatenate(picked) if picked else np.zeros(0, dtype=np.int64)


def _split_counts(n: int, k: int):
    base, extra = divmod(n, k)
    return [base + (i < extra) for i in range(k)]


def make_task(data: LabeledImageSet, classes, n_train: int, n_test: int, seed):
    """Stratified, disjoint train/test draws over ``classes``; labels remapped to 0..k-1."""
    classes = list(classes)
    if len(set(classes)) != len(classes) or len(classes) < 2:
        raise DataError(f"need at least two distinct classes, got {classes}")
    rng = np.random.default_rng(seed)
    pools = {c: rng.permutation(np.flatnonzero(data.labels == c)) for c in classes}
    need = {c: a + b for c, a, b in zip(classes, _split_counts(n_train, len(classes)), _split_counts(n_test, len(classes)))}
    for c in classes:
        if need[c] > len(pools[c]):
            raise InsufficientSamplesError(f"class {c}: need {need[c]} samples, only {len(pools[c])} available")
    train_idx = _draw(pools, zip(classes, _split_counts(n_train, len(classes))), rng)
    test_idx = _draw(pools, zip(classes, _split_counts(n_test, len(classes))), rng)
    remap = np.full(max(data.class_count, max(classes) + 1), -1, dtype=np.int64)
    remap[classes] = np.arange(len(classes))

    def build(idx):
        idx = rng.permutation(idx)
        return LabeledImageSet(data.images[idx], remap[data.labels[idx]], len(classes))

    return build(train_idx), build(test_idx)


def make_binary_task(data: LabeledImageSet, class_a: int, class_b: int, n_train: int, n_test: int, seed):
    """Balanced two-class task; ``class_a`` becomes label 0 and ``class_b`` label 1."""
    return make_task(data, [class_a, class_b], n_train, n_test, seed)


def make_multiclass_task(data: LabeledImageSet, n_train: int = 1500, n_test: int = 300, seed=0):
    return make_task(data, list(range(data.class_count)), n_train, n_test, seed)


def downsample(data: LabeledImageSet, factor: int) -> LabeledImageSet:
    """Non-overlapping mean pooling by ``factor``; factor 1 is a no-op."""
    if factor not in (1, 2, 4):
        raise DataError(f"downsample factor must be 1, 2 or 4, got {factor}")
    n, q, p = data.images.shape
    if q % factor or p % factor:
        raise DataError(f"image size {q}x{p} not divisible by {factor}")
    pooled = data.images.reshape(n, q // factor, factor, p // factor, factor).mean(axis=(2, 4))
    return LabeledImageSet(np.clip(pooled, 0.0, 1.0), data.labels.copy(), data.class_count)


def split_validation(data: LabeledImageSet, fraction: float, seed):
    """Carve a stratified validation split off ``data``; returns (train, val)."""
    rng = np.random.default_rng(seed)
    val = []
    for c in range(data.class_count):
        idx = rng.permutation(np.flatnonzero(data.labels == c))
        val.append(idx[:int(round(fraction * len(idx)))])
    val = np.sort(np.concatenate(val))
    keep = np.setdiff1d(np.arange(len(data)), val)
    return data.subset(keep), data.subset(val)
