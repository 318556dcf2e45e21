"""Feature matrices, the feature CSV format, and synthetic generators.

Feature CSV layout (UTF-8, ``.`` decimal separator, no missing values)::

    sample_id,patient_id,label,f0,f1,...,f{w-1}
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .rng import SplitMix64

META_COLUMNS = ("sample_id", "patient_id", "label")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Samples x features table with per-sample ids and integer labels."""

    values: np.ndarray
    sample_ids: tuple
    patient_ids: tuple
    labels: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ShapeError(f"feature values must be 2-D with width >= 1, got shape {values.shape}")
        z = values.shape[0]
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.sample_ids) != z or len(self.patient_ids) != z or labels.shape[0] != z:
            raise ShapeError("sample_ids, patient_ids and labels must match the number of rows")
        if not np.all(np.isfinite(values)):
            raise DataError("feature values contain NaN or infinity")
        if z and labels.min() < 0:
            raise DataError("labels must be non-negative integers")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "patient_ids", tuple(str(p) for p in self.patient_ids))

    @classmethod
    def from_arrays(cls, values, labels, patient_ids=None, sample_ids=None):
        values = np.asarray(values, dtype=np.float64)
        z = values.shape[0]
        if sample_ids is None:
            sample_ids = [f"s{i}" for i in range(z)]
        if patient_ids is None:
            patient_ids = list(sample_ids)
        return cls(values, sample_ids, patient_ids, labels)

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def rows(self, index):
        index = np.asarray(index, dtype=np.int64)
        return FeatureMatrix(
            self.values[index],
            [self.sample_ids[i] for i in index],
            [self.patient_ids[i] for i in index],
            self.labels[index],
        )

    def with_values(self, values):
        return FeatureMatrix(values, self.sample_ids, self.patient_ids, self.labels)


def read_feature_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file")
            if tuple(header[:3]) != META_COLUMNS or len(header) < 4:
                raise DataError(f"{path}: header must start with {','.join(META_COLUMNS)} and have >= 1 feature column")
            width = len(header) - 3
            sample_ids, patient_ids, labels, rows = [], [], [], []
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != width + 3:
                    raise DataError(f"{path}:{lineno}: expected {width + 3} fields, got {len(rec)}")
                sample_ids.append(rec[0])
                patient_ids.append(rec[1])
                try:
                    labels.append(int(rec[2]))
                    rows.append([float(x) for x in rec[3:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return FeatureMatrix(np.array(rows, dtype=np.float64), sample_ids, patient_ids, labels)


def write_feature_csv(data, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(META_COLUMNS) + [f"f{i}" for i in range(data.width)])
        for i in range(data.n_samples):
            writer.writerow(
                [data.sample_ids[i], data.patient_ids[i], int(data.labels[i])]
                + [repr(float(x)) for x in data.values[i]]
            )


def make_blobs(n_samples=500, n_features=62, n_classes=5, n_patients=50, spacing=6.0, seed=0):
    """Well-separated Gaussian blobs with unit noise.

    Each feature places the class centres on the grid ``0, spacing, ...,
    (K-1)*spacing`` under its own random class ordering, so every single
    feature already separates all classes. Samples are assigned to
    patients round-robin; a patient's samples share one label.
    """
    if n_patients > n_samples or n_patients < 1:
        raise ValueError("need 1 <= n_patients <= n_samples")
    rng = SplitMix64(seed)
    centres = np.empty((n_classes, n_features))
    for j in range(n_features):
        centres[:, j] = rng.permutation(n_classes) * spacing
    patient_of = np.arange(n_samples) % n_patients
    patient_label = np.arange(n_patients) % n_classes
    labels = patient_label[patient_of]
    values = centres[labels] + rng.normal((n_samples, n_features))
    return FeatureMatrix(
        values,
        [f"s{i:05d}" for i in range(n_samples)],
        [f"p{p:04d}" for p in patient_of],
        labels,
    )


def make_distinct_variance_features(width, n_samples=64, n_classes=5, seed=0):
    """Feature matrix whose ``width`` per-feature variances are all distinct.

    Column ``i`` is a shared standardized base column scaled by a distinct
    factor, then the columns are shuffled so variance is unrelated to index.
    """
    rng = SplitMix64(seed)
    base = rng.normal(n_samples)
    base = (base - base.mean()) / base.std()
    scales = 1.0 + np.arange(width) / width
    values = np.outer(base, scales)[:, rng.permutation(width)]
    labels = np.arange(n_samples) % n_classes
    return FeatureMatrix.from_arrays(values, labels)
