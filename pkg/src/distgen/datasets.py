"""Dataset containers, IDX loading, standardization, synthetic tasks and sharding."""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    BadMagicError,
    CountMismatchError,
    DataError,
    TruncatedFileError,
)
from .seeding import child_seed, make_rng

__all__ = [
    "Dataset",
    "StandardizeStats",
    "Standardizer",
    "ShardPlan",
    "load_idx",
    "filter_binary",
    "standardize_fit",
    "standardize_apply",
    "synth_two_gaussians",
    "shard",
    "shard_indices",
    "load_mnist_binary",
    "MNIST_FILES",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with aligned labels.

    Instances are treated as read-only throughout the package; arrays are
    not copied on construction, so callers should not mutate them afterwards.

    Parameters
    ----------
    X : ndarray of shape (n_samples, n_features)
        Finite real features.
    y : ndarray of shape (n_samples,)
        Labels. Binary tasks use ``{-1, +1}``; raw IDX data keeps digits 0-9.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(
                f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}"
            )
        if X.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def subset(self, indices):
        """Return the rows at ``indices`` (in the given order) as a new dataset."""
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.X[indices], self.y[indices])

    def is_binary(self):
        return bool(np.all(np.isin(self.y, (-1, 1))))


def _open(path):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic, n_dims):
    try:
        with _open(path) as fh:
            raw = fh.read()
    except FileNotFoundError as exc:
        raise DataError(f"IDX file not found: {path}") from exc
    header_size = 4 * (1 + n_dims)
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: truncated file (no magic number)")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    if len(raw) < header_size:
        raise TruncatedFileError(f"{path}: truncated file (incomplete header)")
    dims = struct.unpack(f">{n_dims}I", raw[4:header_size])
    payload = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header_size + payload:
        raise TruncatedFileError(
            f"{path}: truncated file ({len(raw) - header_size} of {payload} data bytes)"
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=payload, offset=header_size)
    return dims, data


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair (the MNIST container format).

    Images are flattened row-major into ``rows * cols`` features with raw
    pixel values in ``[0, 255]``; labels are kept as digits. Paths ending in
    ``.gz`` are decompressed transparently.

    Raises
    ------
    BadMagicError
        Either file carries the wrong magic number.
    TruncatedFileError
        Either file is shorter than its header declares.
    CountMismatchError
        The two files declare different item counts.
    """
    (n_img, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (n_lab,), labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise CountMismatchError(
            f"count mismatch: {n_img} images but {n_lab} labels"
        )
    X = pixels.reshape(n_img, rows * cols).astype(np.float64)
    return Dataset(X, labels.astype(np.int64))


def filter_binary(data, pos_digit, neg_digit):
    """Keep two classes and relabel them ``+1`` (``pos_digit``) and ``-1``.

    Row order and feature values are preserved exactly.
    """
    if pos_digit == neg_digit:
        raise ValueError("pos_digit and neg_digit must differ")
    for digit in (pos_digit, neg_digit):
        if not 0 <= int(digit) <= 9:
            raise ValueError(f"digits must lie in 0-9, got {digit}")
    is_pos = data.y == pos_digit
    is_neg = data.y == neg_digit
    if not is_pos.any() or not is_neg.any():
        raise DataError(f"no samples for class pair ({pos_digit}, {neg_digit})")
    keep = np.flatnonzero(is_pos | is_neg)
    y = np.where(is_pos[keep], 1, -1).astype(np.int64)
    return Dataset(data.X[keep], y)


@dataclass(frozen=True)
class StandardizeStats:
    """Per-coordinate mean and (population) standard deviation."""

    mean: np.ndarray
    std: np.ndarray


def standardize_fit(data):
    """Fit per-coordinate mean and population standard deviation.

    Coordinates with zero variance get ``std = 1`` so that they map to zero.
    """
    X = data.X if isinstance(data, Dataset) else check_array(data)
    if X.shape[0] < 2:
        raise ValueError("standardize_fit needs at least two samples")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # Constant columns are detected exactly; their rounded mean can be off
    # by an ulp, which would leave a tiny nonzero std.
    constant = np.ptp(X, axis=0) == 0.0
    mean[constant] = X[0, constant]
    std[constant | (std == 0.0)] = 1.0
    return StandardizeStats(mean=mean, std=std)


def standardize_apply(data, stats):
    """Apply previously fitted statistics to ``data``."""
    X = data.X if isinstance(data, Dataset) else check_array(data)
    if X.shape[1] != stats.mean.shape[0]:
        raise ValueError(
            f"dimension mismatch: data has {X.shape[1]} features, "
            f"stats were fitted on {stats.mean.shape[0]}"
        )
    Z = (X - stats.mean) / stats.std
    if isinstance(data, Dataset):
        return Dataset(Z, data.y)
    return Z


class Standardizer(TransformerMixin, BaseEstimator):
    """Zero-mean, unit-variance scaling with the population variance.

    Unlike :class:`sklearn.preprocessing.StandardScaler`, this transformer
    is documented to use the ``1/N`` variance and to map constant columns
    to zero, which makes the post-fit moments exact on the fitted set.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    scale_ : ndarray of shape (n_features,)
    """

    def fit(self, X, y=None):
        X = check_array(X)
        stats = standardize_fit(X)
        self.mean_ = stats.mean
        self.scale_ = stats.std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        return standardize_apply(check_array(X), StandardizeStats(self.mean_, self.scale_))


def synth_two_gaussians(d, n_total, separation, label_noise, seed):
    """Two spherical unit-variance Gaussian clusters at ``±(separation/2)·e1``.

    Labels are drawn uniformly from ``{-1, +1}``; each label is then flipped
    independently with probability ``label_noise``.

    Parameters
    ----------
    d : int
        Feature dimension (``>= 1``).
    n_total : int
        Number of samples (``>= 2``).
    separation : float
        Distance between the cluster centres (``>= 0``).
    label_noise : float
        Flip probability in ``[0, 0.5)``.
    seed : int
        Seed for the generator.
    """
    if d < 1 or n_total < 2 or separation < 0 or not 0 <= label_noise < 0.5:
        raise ValueError("invalid synthetic task parameters")
    rng = make_rng(seed)
    y = np.where(rng.random(n_total) < 0.5, -1, 1)
    X = rng.standard_normal((n_total, d))
    X[:, 0] += 0.5 * separation * y
    flip = rng.random(n_total) < label_noise
    y = np.where(flip, -y, y).astype(np.int64)
    return Dataset(X, y)


@dataclass(frozen=True)
class ShardPlan:
    """How client shards are drawn from a pool.

    Each client draws ``n`` distinct indices uniformly at random from the
    pool; draws are independent across clients, so shards may overlap.
    Setting ``disjoint=True`` instead partitions one random permutation.
    """

    K: int
    n: int
    seed: int
    disjoint: bool = False

    def __post_init__(self):
        if self.K < 1 or self.n < 1:
            raise ValueError("K and n must be positive")


def shard_indices(pool_size, plan):
    """Index arrays of each client's shard for a pool of ``pool_size`` rows."""
    need = plan.n * plan.K if plan.disjoint else plan.n
    if need > pool_size:
        raise ValueError(f"shard needs {need} samples but the pool has {pool_size}")
    if plan.disjoint:
        perm = make_rng(child_seed(plan.seed, "shard-disjoint")).permutation(pool_size)
        return [perm[i * plan.n:(i + 1) * plan.n] for i in range(plan.K)]
    out = []
    for i in range(plan.K):
        rng = make_rng(child_seed(plan.seed, "shard", i))
        out.append(rng.permutation(pool_size)[: plan.n])
    return out


def shard(pool, plan):
    """Draw the ``K`` client datasets described by ``plan`` from ``pool``."""
    return [pool.subset(idx) for idx in shard_indices(pool.n_samples, plan)]


def load_mnist_binary(data_dir, pos_digit=1, neg_digit=6):
    """Load the MNIST train/test splits for one digit pair.

    Files are looked up under ``data_dir`` with their standard names,
    optionally gzip-compressed.

    Returns
    -------
    train, test : Dataset
        Binary datasets with raw pixel features.
    """
    paths = {}
    for key, name in MNIST_FILES.items():
        for candidate in (name, name + ".gz"):
            full = os.path.join(data_dir, candidate)
            if os.path.exists(full):
                paths[key] = full
                break
        else:
            raise DataError(
                f"MNIST file {name}[.gz] not found in {data_dir!r}; set "
                "DISTGEN_DATA_DIR to the directory holding the IDX files or pass "
                "--synthetic to use the synthetic fallback task"
            )
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return (
        filter_binary(train, pos_digit, neg_digit),
        filter_binary(test, pos_digit, neg_digit),
    )
