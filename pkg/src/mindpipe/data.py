"""Dataset loading, synthetic generation, splitting, and classification metrics.

Sample files are plain CSV: one sample per line, ``channel_count`` float
fields followed by one integer label, no header, UTF-8, '\\n' endings.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ShapeError, ValidationError

DEFAULT_CHANNELS = 14
DEFAULT_SAMPLE_RATE = 128
DEFAULT_CLASSES = 6


@dataclass
class Sample:
    """One signal vector with its integer class label."""

    features: np.ndarray
    label: int


@dataclass
class Dataset:
    """An ordered collection of samples stored as arrays.

    ``features`` is [n, channel_count] float64, ``labels`` [n] int64.
    """

    features: np.ndarray
    labels: np.ndarray
    channel_count: int = DEFAULT_CHANNELS
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    class_count: int = DEFAULT_CLASSES

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-D array")
        if self.features.shape[1] != self.channel_count:
            raise ShapeError(
                f"features have {self.features.shape[1]} channels, "
                f"expected {self.channel_count}"
            )
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError("labels length must match number of samples")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features contain non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValidationError(
                f"labels must lie in [0, {self.class_count}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self):
        for row, label in zip(self.features, self.labels):
            yield Sample(features=row, label=int(label))

    def subset(self, indices):
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            channel_count=self.channel_count,
            sample_rate_hz=self.sample_rate_hz,
            class_count=self.class_count,
        )


@dataclass
class CsvSchema:
    """Loader configuration: field layout of a sample CSV."""

    channel_count: int = DEFAULT_CHANNELS
    class_count: int = DEFAULT_CLASSES
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE


def load_dataset(path, schema=None):
    """Parse a sample CSV into a Dataset, preserving row order.

    Rejects rows with the wrong field count, non-numeric fields, NaN or
    infinity, or out-of-range labels; errors carry the 1-based row number.
    """
    schema = schema or CsvSchema()
    rows = []
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != schema.channel_count + 1:
                raise ParseError(
                    f"row {lineno}: expected {schema.channel_count + 1} fields, "
                    f"got {len(fields)}",
                    row=lineno,
                )
            try:
                values = [float(tok) for tok in fields[:-1]]
                label = int(fields[-1])
            except ValueError as exc:
                raise ParseError(f"row {lineno}: {exc}", row=lineno) from None
            if not all(np.isfinite(v) for v in values):
                raise ParseError(f"row {lineno}: non-finite feature value", row=lineno)
            if not 0 <= label < schema.class_count:
                raise ValidationError(
                    f"row {lineno}: label {label} out of range for "
                    f"{schema.class_count} classes"
                )
            rows.append(values)
            labels.append(label)
    if not rows:
        raise ValidationError(f"{path}: no samples found")
    return Dataset(
        features=np.array(rows, dtype=float),
        labels=np.array(labels, dtype=np.int64),
        channel_count=schema.channel_count,
        sample_rate_hz=schema.sample_rate_hz,
        class_count=schema.class_count,
    )


def save_dataset(dataset, path):
    """Write a Dataset as CSV with shortest round-trip float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        for row, label in zip(dataset.features, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write(f",{int(label)}\n")


def synthetic_features(class_id, sample_index, channel_count=DEFAULT_CHANNELS,
                       class_count=DEFAULT_CLASSES, tick_stride=16):
    """Noiseless closed form of the synthetic generator.

    Samples are laid out round-robin over the classes, spaced ``tick_stride``
    ticks apart on the 128 Hz clock: the sample with per-class index t of
    class c sits at clock tick ``tick_stride * (class_count * t + c)``.
    Channel k of class c carries an amplitude pattern
    ``1 + 0.5 * ((k + c) % 3)`` on a ``4 + 2c`` Hz sinusoid with a
    per-channel phase offset ``pi * k / channel_count``.
    """
    k = np.arange(channel_count)
    tick = tick_stride * (class_count * sample_index + class_id)
    freq = 4 + 2 * class_id
    amplitude = 1.0 + 0.5 * ((k + class_id) % 3)
    phase = 2.0 * np.pi * freq * tick / 128.0 + np.pi * k / channel_count
    return amplitude * np.sin(phase)


def generate_synthetic(n_per_class, channel_count=DEFAULT_CHANNELS, noise_sigma=0.1,
                       seed=0, class_count=DEFAULT_CLASSES):
    """Generate a class-separable synthetic dataset.

    Emits ``n_per_class * class_count`` samples interleaved round-robin over
    the classes (sample j has label j % class_count), each equal to the
    closed form from :func:`synthetic_features` plus Gaussian noise.
    Deterministic given the seed; with ``noise_sigma`` 0 the output is
    seed-independent.
    """
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    n = n_per_class * class_count
    features = np.empty((n, channel_count))
    labels = np.empty(n, dtype=np.int64)
    for t in range(n_per_class):
        for c in range(class_count):
            j = class_count * t + c
            features[j] = synthetic_features(c, t, channel_count, class_count)
            labels[j] = c
    if noise_sigma > 0:
        features += rng.normal(0.0, noise_sigma, size=features.shape)
    return Dataset(
        features=features,
        labels=labels,
        channel_count=channel_count,
        class_count=class_count,
    )


def split(dataset, train_fraction, seed=0):
    """Stratified train/test split, deterministic given the seed.

    Per label, floor(n * fraction) samples go to the train side (at least 1,
    at most n-1).  Row order within each side follows the input dataset.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for label in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == label)
        if members.size == 0:
            continue
        if members.size < 2:
            raise ValidationError(
                f"class {label} has {members.size} sample(s); need >= 2 to stratify"
            )
        shuffled = rng.permutation(members)
        n_train = int(np.floor(members.size * train_fraction))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(shuffled[:n_train])
        test_idx.extend(shuffled[n_train:])
    train_idx = np.sort(np.array(train_idx, dtype=int))
    test_idx = np.sort(np.array(test_idx, dtype=int))
    return dataset.subset(train_idx), dataset.subset(test_idx)


def stratified_sample_indices(labels, per_class, seed=0):
    """Pick up to ``per_class`` indices per label, deterministic given seed."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    picked = []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        take = min(per_class, members.size)
        picked.extend(rng.permutation(members)[:take])
    return np.sort(np.array(picked, dtype=int))


@dataclass
class Metrics:
    """Classification metrics with a confusion matrix (rows=actual, cols=predicted)."""

    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray = field(repr=False)


def compute_metrics(predicted, actual, class_count=DEFAULT_CLASSES):
    """Accuracy plus macro precision/recall/F1 and the confusion matrix.

    Per-class precision or recall with a zero denominator counts as 0 in the
    macro average.
    """
    predicted = np.asarray(predicted, dtype=int)
    actual = np.asarray(actual, dtype=int)
    if predicted.shape != actual.shape or predicted.ndim != 1:
        raise ValidationError("predicted and actual must be equal-length 1-D sequences")
    if predicted.size == 0:
        raise ValidationError("cannot compute metrics over zero samples")
    confusion = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(confusion, (actual, predicted), 1)
    diag = np.diag(confusion).astype(float)
    col = confusion.sum(axis=0).astype(float)
    row = confusion.sum(axis=1).astype(float)
    precision = np.divide(diag, col, out=np.zeros(class_count), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(class_count), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(class_count), where=pr > 0)
    return Metrics(
        accuracy=float(diag.sum() / predicted.size),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        confusion=confusion,
    )
