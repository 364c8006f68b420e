"""Dataset container, the AIIVE-DS/1 file pair, and the synthetic generator.

File pair layout:
  <prefix>.meta  text: magic line "AIIVE-DS/1", then key=value lines
                 n, d, c, train, val, test
  <prefix>.bin   little-endian: n*d float32 images (row-major, values in
                 [0,1]), then n uint8 labels

Splits are contiguous: rows [0, train) are training, [train, train+val)
validation, the rest test.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

MAGIC = "AIIVE-DS/1"

DEFAULT_COUNTS = (3374, 419, 385)
DEFAULT_SIDE = 48
DEFAULT_CLASSES = 7
NOISE_SIGMA = 0.15


@dataclass
class Dataset:
    images: np.ndarray  # (n, d) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in [0, c)
    num_classes: int
    train_idx: np.ndarray = field(repr=False)
    val_idx: np.ndarray = field(repr=False)
    test_idx: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n, _ = self.images.shape
        if self.labels.shape != (n,):
            raise ValueError(f"labels shape {self.labels.shape} != ({n},)")
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= self.num_classes:
            raise ValueError("labels out of range for num_classes")
        all_idx = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if len(np.unique(all_idx)) != len(all_idx):
            raise ValueError("splits overlap")
        if len(all_idx) != n:
            raise ValueError("splits do not cover the dataset")

    @property
    def input_dim(self) -> int:
        return self.images.shape[1]

    @property
    def split_counts(self) -> tuple[int, int, int]:
        return (len(self.train_idx), len(self.val_idx), len(self.test_idx))


def _contiguous_splits(counts: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_train, n_val, n_test = counts
    edges = np.cumsum([0, n_train, n_val, n_test])
    return (
        np.arange(edges[0], edges[1]),
        np.arange(edges[1], edges[2]),
        np.arange(edges[2], edges[3]),
    )


def generate_dataset(
    seed: int,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    side: int = DEFAULT_SIDE,
    num_classes: int = DEFAULT_CLASSES,
    noise: float = NOISE_SIGMA,
) -> Dataset:
    """Synthetic classification set: one smooth random field per class,
    each sample is its class template plus i.i.d. pixel noise, clamped to [0,1].
    """
    if any(c < 0 for c in counts) or counts[0] < 1:
        raise ValueError(f"bad split counts {counts}")
    rng = np.random.default_rng(seed)
    d = side * side

    # Bright blobs on a dark background: thresholding a smooth random field
    # (blob scale ~ side/8) keeps the inputs sparse. Dense mid-gray fields
    # leave a large all-positive DC component that makes SGD at momentum
    # ~0.9 kill the first ReLU layer within one epoch.
    templates = np.empty((num_classes, d))
    for c in range(num_classes):
        f = gaussian_filter(rng.standard_normal((side, side)), sigma=side / 8.0)
        f = (f - f.mean()) / (f.std() + 1e-12)
        templates[c] = np.clip(0.9 * np.maximum(f - 0.8, 0.0), 0.0, 1.0).ravel()

    n = int(sum(counts))
    labels = (np.arange(n) % num_classes).astype(np.int64)
    rng.shuffle(labels)
    images = templates[labels] + rng.normal(0.0, noise, size=(n, d))
    np.clip(images, 0.0, 1.0, out=images)

    train_idx, val_idx, test_idx = _contiguous_splits(counts)
    return Dataset(
        images=images,
        labels=labels,
        num_classes=num_classes,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
    )


def save_dataset(ds: Dataset, prefix: str) -> None:
    """Write <prefix>.meta and <prefix>.bin."""
    n, d = ds.images.shape
    n_train, n_val, n_test = ds.split_counts
    meta = "\n".join(
        [
            MAGIC,
            f"n={n}",
            f"d={d}",
            f"c={ds.num_classes}",
            f"train={n_train}",
            f"val={n_val}",
            f"test={n_test}",
        ]
    )
    with open(prefix + ".meta", "w", encoding="ascii") as fh:
        fh.write(meta + "\n")
    with open(prefix + ".bin", "wb") as fh:
        fh.write(ds.images.astype("<f4").tobytes())
        fh.write(ds.labels.astype(np.uint8).tobytes())


def load_dataset(prefix: str) -> Dataset:
    """Read a dataset file pair written by save_dataset (or any producer of the format)."""
    meta_path, bin_path = prefix + ".meta", prefix + ".bin"
    with open(meta_path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{meta_path}: bad magic, expected {MAGIC!r}")
    fields: dict[str, int] = {}
    for ln in lines[1:]:
        key, _, value = ln.partition("=")
        fields[key] = int(value)
    try:
        n, d, c = fields["n"], fields["d"], fields["c"]
        counts = (fields["train"], fields["val"], fields["test"])
    except KeyError as missing:
        raise ValueError(f"{meta_path}: missing field {missing}") from None
    if sum(counts) != n:
        raise ValueError(f"{meta_path}: split counts {counts} do not sum to n={n}")

    expected = n * d * 4 + n
    size = os.path.getsize(bin_path)
    if size != expected:
        raise ValueError(f"{bin_path}: size {size}, expected {expected} for n={n}, d={d}")
    with open(bin_path, "rb") as fh:
        images = np.frombuffer(fh.read(n * d * 4), dtype="<f4").reshape(n, d).astype(np.float64)
        labels = np.frombuffer(fh.read(n), dtype=np.uint8).astype(np.int64)

    train_idx, val_idx, test_idx = _contiguous_splits(counts)
    return Dataset(
        images=images,
        labels=labels,
        num_classes=c,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
    )
