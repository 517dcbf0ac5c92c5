"""Ground-truth datasets, MNIST IDX I/O, batching and latent sampling."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigurationError,
    DataConsistencyError,
    IdxFormatError,
    TruncatedFileError,
)

IMAGES_MAGIC = 0x00000803  # 2051
LABELS_MAGIC = 0x00000801  # 2049

MNIST123_SUBSET = {1: 5000, 2: 3000, 3: 2000}


class Rng:
    """Seeded random stream that counts how many variates it has handed out.

    Wraps :class:`numpy.random.Generator`; the draw counter exists so tests
    can compare how much randomness two code paths consume.
    """

    def __init__(self, seed=None):
        if isinstance(seed, np.random.SeedSequence):
            self.seed = seed.entropy
            self._gen = np.random.Generator(np.random.PCG64(seed))
        else:
            self.seed = seed
            self._gen = np.random.default_rng(seed)
        self.draws = 0

    @classmethod
    def spawn_from(cls, seed, n):
        """``n`` independent streams derived from one integer seed."""
        return [cls(ss) for ss in np.random.SeedSequence(seed).spawn(n)]

    def uniform(self, low, high, size):
        out = self._gen.uniform(low, high, size=size)
        self.draws += out.size
        return out

    def permutation(self, n):
        self.draws += n
        return self._gen.permutation(n)

    def integers(self, low, high=None, size=None):
        out = self._gen.integers(low, high, size=size)
        self.draws += np.size(out)
        return out

    @property
    def generator(self):
        return self._gen


@dataclass
class MnistSet:
    images: np.ndarray  # (N, rows*cols), values in [0, 1]
    labels: np.ndarray  # (N,), ints 0-9
    shape: tuple = (28, 28)

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataConsistencyError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self):
        return len(self.labels)


def _need(n, minimum, what):
    if int(n) != n or n < minimum:
        raise ConfigurationError(f"{what} needs n >= {minimum}, got {n}")
    return int(n)


def gen_sine(n, rng: Rng) -> np.ndarray:
    """``n`` points on y = sin(x) with x uniform on [0, 2*pi]."""
    n = _need(n, 1, "gen_sine")
    x = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([x, np.sin(x)])


def _split(n, k):
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def gen_ellipses(n, rng: Rng) -> np.ndarray:
    """Two overlapping ellipse outlines.

    The first ``ceil(n/2)`` rows lie on (x/2)^2 + y^2 = 1, the rest on
    (x-1)^2 + (y/2)^2 = 1. Angles are uniform on each curve.
    """
    n = _need(n, 2, "gen_ellipses")
    na, nb = _split(n, 2)
    ta = rng.uniform(0.0, 2.0 * np.pi, na)
    tb = rng.uniform(0.0, 2.0 * np.pi, nb)
    a = np.column_stack([2.0 * np.cos(ta), np.sin(ta)])
    b = np.column_stack([1.0 + np.cos(tb), 2.0 * np.sin(tb)])
    return np.vstack([a, b])


def gen_circles(n, rng: Rng) -> np.ndarray:
    """Three concentric circles of radius 1, 2 and 3, split as evenly as possible."""
    n = _need(n, 3, "gen_circles")
    parts = []
    for radius, count in zip((1.0, 2.0, 3.0), _split(n, 3)):
        t = rng.uniform(0.0, 2.0 * np.pi, count)
        parts.append(radius * np.column_stack([np.cos(t), np.sin(t)]))
    return np.vstack(parts)


SYNTHETIC = {"sine": gen_sine, "ellipses": gen_ellipses, "circles": gen_circles}


def _read_exact(f, n, path):
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(
            f"{path}: expected {n} more bytes, file ended after {len(data)}"
        )
    return data


def _read_idx(path, magic, ndim):
    with open(path, "rb") as f:
        (found,) = struct.unpack(">i", _read_exact(f, 4, path))
        if found != magic:
            raise IdxFormatError(
                f"{path}: magic number {found} (expected {magic})"
            )
        dims = struct.unpack(f">{ndim}i", _read_exact(f, 4 * ndim, path))
        if any(d < 0 for d in dims):
            raise IdxFormatError(f"{path}: negative dimension in header {dims}")
        size = int(np.prod(dims))
        body = _read_exact(f, size, path)
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_mnist_idx(images_path, labels_path) -> MnistSet:
    """Read an MNIST image/label file pair; pixels are scaled to [0, 1]."""
    raw = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, LABELS_MAGIC, 1)
    if raw.shape[0] != labels.shape[0]:
        raise DataConsistencyError(
            f"{images_path} holds {raw.shape[0]} images but "
            f"{labels_path} holds {labels.shape[0]} labels"
        )
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"{labels_path}: label {int(labels.max())} outside 0-9")
    n, rows, cols = raw.shape
    images = raw.reshape(n, rows * cols).astype(np.float64) / 255.0
    return MnistSet(images, labels.astype(np.int64), (rows, cols))


def write_mnist_idx(data: MnistSet, images_path, labels_path):
    """Write ``data`` as an IDX pair; inverse of :func:`load_mnist_idx`."""
    rows, cols = data.shape
    pixels = np.rint(np.clip(data.images, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", IMAGES_MAGIC, len(data), rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", LABELS_MAGIC, len(data)))
        f.write(np.asarray(data.labels, dtype=np.uint8).tobytes())


def find_mnist_files(directory, split="train"):
    """Locate the ``(images, labels)`` paths of a standard MNIST directory."""
    prefix = "train" if split == "train" else "t10k"
    images = os.path.join(directory, f"{prefix}-images-idx3-ubyte")
    labels = os.path.join(directory, f"{prefix}-labels-idx1-ubyte")
    return images, labels


def subset_mnist(data: MnistSet, wanted) -> MnistSet:
    """First-k images of each requested digit, concatenated by ascending digit."""
    if not wanted:
        raise ConfigurationError("subset request is empty")
    picks = []
    for digit in sorted(wanted):
        count = int(wanted[digit])
        if not 0 <= digit <= 9:
            raise ConfigurationError(f"digit {digit} outside 0-9")
        if count < 1:
            raise ConfigurationError(f"count for digit {digit} must be >= 1, got {count}")
        idx = np.flatnonzero(data.labels == digit)
        if len(idx) < count:
            raise ConfigurationError(
                f"digit {digit}: requested {count}, only {len(idx)} available "
                f"(short by {count - len(idx)})"
            )
        picks.append(idx[:count])
    order = np.concatenate(picks)
    return MnistSet(data.images[order], data.labels[order], data.shape)


def batches(points, batch_size, rng: Rng) -> list[np.ndarray]:
    """Shuffle rows once and cut them into batches; the last one may be short."""
    if int(batch_size) != batch_size or batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    batch_size = int(batch_size)
    perm = rng.permutation(len(points))
    shuffled = points[perm]
    return [shuffled[i:i + batch_size] for i in range(0, len(points), batch_size)]


def sample_latent(n, dim, rng: Rng) -> np.ndarray:
    """An ``(n, dim)`` matrix of i.i.d. uniform[-1, 1] draws."""
    if n < 1 or dim < 1:
        raise ConfigurationError(f"latent sample needs n, dim >= 1, got {n}, {dim}")
    return rng.uniform(-1.0, 1.0, (int(n), int(dim)))
