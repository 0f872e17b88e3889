"""In-memory datasets, normalization, augmentation and batching."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .formats import load_cifar10_binary, load_cifar100_binary, load_idx

# per-channel (mean, std) of the training sets
NORMALIZATION = {
    "cifar10": ((0.491, 0.482, 0.447), (0.247, 0.243, 0.262)),
    "cifar100": ((0.507, 0.487, 0.441), (0.267, 0.256, 0.276)),
    "imagenet": ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
    "mnist": ((0.1307,), (0.3081,)),
}

_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class Dataset:
    """Images ``N x C x H x W`` (or ``N x D`` for vector data) with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    split: str
    name: str
    num_classes: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "Dataset":
        return replace(self, images=self.images[indices], labels=self.labels[indices])


@dataclass(frozen=True)
class AugmentationPolicy:
    pad_pixels: int = 4
    crop_size: int = 32
    hflip_prob: float = 0.5

    def __post_init__(self):
        if self.pad_pixels < 0 or self.crop_size < 1:
            raise ValueError("pad_pixels must be >= 0 and crop_size >= 1")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError("hflip_prob must lie in [0, 1]")

    def check(self, height, width):
        if self.crop_size > min(height, width) + 2 * self.pad_pixels:
            raise ValueError(f"crop {self.crop_size} does not fit a padded {height}x{width} image")


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"missing {stem}[.gz] in {directory}")


def load_mnist(directory, split="train") -> Dataset:
    directory = Path(directory)
    images_file, labels_file = _MNIST_FILES[split]
    images = load_idx(_find(directory, images_file))
    labels = load_idx(_find(directory, labels_file))
    return Dataset(images[:, None, :, :], labels, split, "mnist", 10)


def load_cifar(directory, split="train", variant="cifar10") -> Dataset:
    directory = Path(directory)
    if variant == "cifar10":
        names = [f"data_batch_{i}.bin" for i in range(1, 6)] if split == "train" else ["test_batch.bin"]
        loader, classes = load_cifar10_binary, 10
    elif variant == "cifar100":
        names = ["train.bin" if split == "train" else "test.bin"]
        loader, classes = load_cifar100_binary, 100
    else:
        raise ValueError(f"unknown CIFAR variant {variant!r}")
    missing = [n for n in names if not (directory / n).exists()]
    if missing:
        raise FileNotFoundError(f"missing {', '.join(missing)} in {directory}")
    parts = [loader(directory / n) for n in names]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return Dataset(images, labels, split, variant, classes)


def _channel_constants(constants, channels, dtype):
    mean, std = (np.asarray(c, dtype=np.float64) for c in constants)
    if mean.shape != (channels,) or std.shape != (channels,):
        raise ValueError(f"need one mean and std per channel ({channels})")
    if np.any(std == 0):
        raise ValueError("standard deviation of a channel is zero")
    shape = (1, channels, 1, 1)
    return mean.reshape(shape).astype(dtype), std.reshape(shape).astype(dtype)


def normalize(dataset: Dataset, constants) -> Dataset:
    """``(x - mean_c) / std_c`` per channel; ``constants`` is ``(means, stds)``."""
    mean, std = _channel_constants(constants, dataset.images.shape[1], dataset.images.dtype)
    return replace(dataset, images=(dataset.images - mean) / std)


def denormalize(dataset: Dataset, constants) -> Dataset:
    mean, std = _channel_constants(constants, dataset.images.shape[1], dataset.images.dtype)
    return replace(dataset, images=dataset.images * std + mean)


def augment(images, policy: AugmentationPolicy, rng, offsets=None, flips=None, fill=0.0):
    """Pad, random-crop and random-flip a batch ``N x C x H x W``.

    ``offsets`` (``N x 2``, crop corner in the padded image) and ``flips``
    (``N`` booleans) override the random draws.  ``fill`` is the padding
    value, i.e. black in the units of ``images``.
    """
    n, c, h, w = images.shape
    policy.check(h, w)
    pad, size = policy.pad_pixels, policy.crop_size
    span_y, span_x = h + 2 * pad - size + 1, w + 2 * pad - size + 1
    if offsets is None:
        offsets = np.stack([rng.integers(0, span_y, n), rng.integers(0, span_x, n)], axis=1)
    if flips is None:
        flips = rng.random(n) < policy.hflip_prob
    fill = np.broadcast_to(np.asarray(fill, dtype=images.dtype).reshape(1, -1, 1, 1), (1, c, 1, 1))
    padded = np.empty((n, c, h + 2 * pad, w + 2 * pad), dtype=images.dtype)
    padded[...] = fill
    padded[:, :, pad:pad + h, pad:pad + w] = images
    out = np.empty((n, c, size, size), dtype=images.dtype)
    for i, (y, x) in enumerate(np.asarray(offsets)):
        crop = padded[i, :, y:y + size, x:x + size]
        out[i] = crop[:, :, ::-1] if flips[i] else crop
    return out


def batch_order(n, seed, epoch) -> np.ndarray:
    """Permutation used for ``epoch``; a pure function of ``(seed, epoch)``."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def batches(dataset: Dataset, batch_size, seed, epoch):
    """Yield ``(images, labels)`` in a seeded shuffled order; the last batch may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = batch_order(len(dataset), seed, epoch)
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


def synthetic_classification(n, classes, rng, dim=20, separation=3.0, split="train") -> Dataset:
    """Gaussian blobs: class centers at distance ``~separation`` and unit noise."""
    centers = rng.standard_normal((classes, dim))
    centers *= separation / np.maximum(np.linalg.norm(centers, axis=1, keepdims=True), 1e-12)
    labels = rng.integers(0, classes, n)
    images = (centers[labels] + rng.standard_normal((n, dim))).astype(np.float32)
    return Dataset(images, labels.astype(np.int64), split, "synthetic", classes)
