"""Confusion matrices and classification reports.

Rows of a confusion matrix are true labels, columns predicted labels.
Every reported number is derived from the matrix alone.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, ShapeError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray
    class_names: tuple = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
            raise ShapeError(f"confusion matrix must be K x K with K >= 2, got {counts.shape}")
        if np.any(counts < 0):
            raise DataError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        names = self.class_names
        if names is None:
            names = tuple(str(k) for k in range(counts.shape[0]))
        elif len(names) != counts.shape[0]:
            raise ShapeError("class_names must have one entry per class")
        object.__setattr__(self, "class_names", tuple(names))

    @property
    def num_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def normalized(self):
        """Row-normalized matrix; rows with no samples stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


def confusion(y_true, y_pred, num_classes, class_names=None):
    y_true = np.ascontiguousarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.ascontiguousarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"y_true has {y_true.size} labels but y_pred has {y_pred.size}")
    if y_true.size == 0:
        raise DataError("no samples to evaluate")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if y.min() < 0 or y.max() >= num_classes:
            raise DataError(f"{name} labels must lie in [0, {num_classes})")
    return ConfusionMatrix(kernels.confusion_counts(y_true, y_pred, num_classes), class_names)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: tuple
    confusion: ConfusionMatrix
    average: str = "macro"
    dimensionality: int | None = None
    warnings: tuple = field(default=())

    # aliases matching the report field names used in tables
    @property
    def macro_precision(self):
        return self.precision

    @property
    def macro_recall(self):
        return self.recall

    @property
    def macro_f1(self):
        return self.f1

    def to_dict(self):
        cm = self.confusion
        return {
            "dimensionality": self.dimensionality,
            "average": self.average,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": [
                {"class": name, "precision": c.precision, "recall": c.recall, "f1": c.f1, "support": c.support}
                for name, c in zip(cm.class_names, self.per_class)
            ],
            "confusion": cm.counts.tolist(),
            "class_names": list(cm.class_names),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        cm = ConfusionMatrix(np.array(d["confusion"]), tuple(d.get("class_names") or ()) or None)
        per_class = tuple(ClassMetrics(c["precision"], c["recall"], c["f1"], c["support"]) for c in d["per_class"])
        return cls(
            d["accuracy"], d["precision"], d["recall"], d["f1"], per_class, cm,
            d.get("average", "macro"), d.get("dimensionality"), tuple(d.get("warnings", ())),
        )


def _ratio(num, den):
    return num / den if den else None


def metrics_from_confusion(cm, average="macro", dimensionality=None):
    """Accuracy plus averaged precision, recall and F1 from one-vs-rest counts.

    A class with neither true samples nor predictions is absent: its
    entries are ``None`` and it is left out of the averages. Otherwise an
    undefined precision or recall (zero denominator) counts as 0 and is
    noted in ``warnings``.
    """
    if average not in ("macro", "weighted"):
        raise ConfigError(f"average must be 'macro' or 'weighted', got {average!r}")
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise DataError("confusion matrix holds no samples")
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    warnings = []
    per_class = []
    for k, name in enumerate(cm.class_names):
        if support[k] == 0 and predicted[k] == 0:
            per_class.append(ClassMetrics(None, None, None, 0))
            continue
        p = _ratio(tp[k], predicted[k])
        r = _ratio(tp[k], support[k])
        if p is None:
            warnings.append(f"precision undefined for class {name} (never predicted); set to 0")
            p = 0.0
        if r is None:
            warnings.append(f"recall undefined for class {name} (no true samples); set to 0")
            r = 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_class.append(ClassMetrics(float(p), float(r), float(f1), int(support[k])))
    present = [c for c in per_class if c.precision is not None]
    if average == "macro":
        weights = [1.0 / len(present)] * len(present)
    else:
        weights = [c.support / total for c in present]

    def avg(attr):
        return float(sum(w * getattr(c, attr) for w, c in zip(weights, present)))

    return ClassificationReport(
        accuracy=float(tp.sum() / total),
        precision=avg("precision"),
        recall=avg("recall"),
        f1=avg("f1"),
        per_class=tuple(per_class),
        confusion=cm,
        average=average,
        dimensionality=dimensionality,
        warnings=tuple(warnings),
    )


def recall_table(cm):
    """Per-class recall; ``None`` where a class has no true samples."""
    rows = cm.counts.sum(axis=1)
    return [float(cm.counts[k, k] / rows[k]) if rows[k] else None for k in range(cm.num_classes)]


def classification_report(y_true, y_pred, num_classes, average="macro", dimensionality=None, class_names=None):
    return metrics_from_confusion(confusion(y_true, y_pred, num_classes, class_names), average, dimensionality)
