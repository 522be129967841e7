"""MNIST-style IDX file ingestion, pixel scaling, and subset selection.

IDX layout (big endian): magic 0x00000803 for images / 0x00000801 for labels,
then the dimension sizes as 32-bit integers, then unsigned bytes. Files ending
in .gz are transparently decompressed. Pixels are scaled by 1/256 on load, so
every value lies in [0, 255/256] and survives a write/read round trip exactly.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
PIXEL_SCALE = 1.0 / 256.0
NUM_CLASSES = 10


class IdxFormatError(ValueError):
    """The bytes on disk are not a well-formed IDX payload."""


@dataclass
class Dataset:
    """Scaled images, labels, and where they came from."""

    images: np.ndarray      # (n, H, W) float32 in [0, 1)
    labels: np.ndarray      # (n,) int in 0..9
    provenance: str = "train"
    seed: int | None = None

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.images.shape[0]} images but "
                             f"{self.labels.shape[0]} labels")

    def __len__(self):
        return self.images.shape[0]


def _open(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n, what, path):
    data = f.read(n)
    if len(data) != n:
        raise IdxFormatError(f"{path}: truncated while reading {what}")
    return data


def load_idx(images_path, labels_path, provenance="train") -> Dataset:
    """Load an image/label IDX pair into a scaled Dataset."""
    with _open(images_path) as f:
        magic, n, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, "image header", images_path))
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x}, "
                                 f"expected 0x{IMAGE_MAGIC:08x}")
        raw = _read_exact(f, n * rows * cols, f"{n} images", images_path)
        if f.read(1):
            raise IdxFormatError(f"{images_path}: trailing bytes after pixels")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)

    with _open(labels_path) as f:
        magic, n_labels = struct.unpack(
            ">II", _read_exact(f, 8, "label header", labels_path))
        if magic != LABEL_MAGIC:
            raise IdxFormatError(f"{labels_path}: bad magic 0x{magic:08x}, "
                                 f"expected 0x{LABEL_MAGIC:08x}")
        raw = _read_exact(f, n_labels, f"{n_labels} labels", labels_path)
        if f.read(1):
            raise IdxFormatError(f"{labels_path}: trailing bytes after labels")
    labels = np.frombuffer(raw, dtype=np.uint8)

    if n != n_labels:
        raise IdxFormatError(f"count mismatch: {n} images vs {n_labels} labels")
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise IdxFormatError(f"label {labels[bad]} at index {bad} outside 0..9")

    images = pixels.astype(np.float32) * np.float32(PIXEL_SCALE)
    return Dataset(images, labels.astype(np.int64), provenance)


def save_idx(ds: Dataset, images_path, labels_path):
    """Write a Dataset back to an IDX pair (inverse of load_idx)."""
    n, rows, cols = ds.images.shape
    pixels = np.round(ds.images / PIXEL_SCALE).astype(np.uint8)
    with (gzip.open(images_path, "wb") if str(images_path).endswith(".gz")
          else open(images_path, "wb")) as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with (gzip.open(labels_path, "wb") if str(labels_path).endswith(".gz")
          else open(labels_path, "wb")) as f:
        f.write(struct.pack(">II", LABEL_MAGIC, n))
        f.write(ds.labels.astype(np.uint8).tobytes())


def select_subset(ds: Dataset, per_class=None, total=None, seed=0) -> Dataset:
    """Deterministic subset: either ``per_class`` samples from every class, or
    ``total`` samples overall. Selected indices keep the original order."""
    if (per_class is None) == (total is None):
        raise ValueError("pass exactly one of per_class / total")
    if per_class == "all":
        return Dataset(ds.images, ds.labels, ds.provenance, seed)
    rng = np.random.default_rng(seed)
    n = len(ds)
    if per_class is not None:
        chosen = []
        for cls in range(NUM_CLASSES):
            idx = np.nonzero(ds.labels == cls)[0]
            if idx.size < per_class:
                raise ValueError(f"class {cls} has {idx.size} samples, "
                                 f"need {per_class}")
            chosen.append(rng.permutation(idx)[:per_class])
        keep = np.sort(np.concatenate(chosen))
    else:
        if total > n:
            raise ValueError(f"requested {total} of {n} samples")
        keep = np.sort(rng.permutation(n)[:total])
    return Dataset(ds.images[keep], ds.labels[keep], ds.provenance, seed)
