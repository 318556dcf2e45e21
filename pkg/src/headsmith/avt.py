"""Adaptive variance thresholding.

The cutoff is not a fixed number but the ``p``-th percentile of the
per-feature variances observed on the training matrix. Features with
variance ``>=`` that cutoff survive.
"""

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix
from .errors import ConfigError, DataError, ShapeError

logger = logging.getLogger(__name__)

PRESETS = {"low": 1.5, "mid": 50.0, "high": 98.5}


def _matrix(data):
    values = data.values if isinstance(data, FeatureMatrix) else np.asarray(data, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise DataError(f"expected a non-empty samples x features matrix, got shape {values.shape}")
    return values


def feature_variances(data, ddof=0):
    """Per-feature variance, dividing by ``z - ddof`` (population variance by default)."""
    values = _matrix(data)
    z = values.shape[0]
    if ddof not in (0, 1):
        raise ConfigError("ddof must be 0 or 1")
    if z - ddof < 1:
        raise DataError(f"cannot compute variance with ddof={ddof} from {z} sample(s)")
    centred = values - values.mean(axis=0)
    return (centred * centred).sum(axis=0) / (z - ddof)


def percentile(values, p):
    """``p``-th percentile by linear interpolation between closest ranks.

    With ``s`` sorted and ``t = (n - 1) * p / 100`` the result is
    ``s[floor(t)] + frac(t) * (s[floor(t) + 1] - s[floor(t)])``.
    """
    s = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if s.size == 0:
        raise DataError("percentile of an empty vector")
    if not 0.0 <= p <= 100.0 or math.isnan(p):
        raise ConfigError(f"percentile must lie in [0, 100], got {p}")
    t = (s.size - 1) * p / 100.0
    lo = math.floor(t)
    frac = t - lo
    if frac == 0.0 or lo + 1 >= s.size:
        return float(s[lo])
    a, b = float(s[lo]), float(s[lo + 1])
    # clamp guards against a + frac*(b-a) rounding past b
    return min(a + frac * (b - a), b)


@dataclass(frozen=True, eq=False)
class VarianceSelector:
    percentile: float
    variances: np.ndarray
    threshold: float
    kept_indices: np.ndarray
    ddof: int = 0
    strict: bool = False

    @property
    def width(self):
        return self.variances.shape[0]

    @property
    def n_kept(self):
        return self.kept_indices.shape[0]

    def to_dict(self):
        return {
            "percentile": self.percentile,
            "threshold": self.threshold,
            "width": self.width,
            "variances": [float(v) for v in self.variances],
            "kept_indices": [int(i) for i in self.kept_indices],
            "ddof": self.ddof,
            "strict": self.strict,
        }

    @classmethod
    def from_dict(cls, doc):
        variances = np.asarray(doc["variances"], dtype=np.float64)
        kept = np.asarray(doc["kept_indices"], dtype=np.int64)
        if variances.shape[0] != doc["width"]:
            raise DataError("selector width does not match its variance vector")
        if kept.size and (np.any(np.diff(kept) <= 0) or kept[0] < 0 or kept[-1] >= variances.shape[0]):
            raise DataError("selector kept_indices must be strictly increasing and within range")
        return cls(
            float(doc["percentile"]),
            variances,
            float(doc["threshold"]),
            kept,
            int(doc.get("ddof", 0)),
            bool(doc.get("strict", False)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def select_from_variances(variances, p, strict=False, ddof=0):
    variances = np.asarray(variances, dtype=np.float64)
    j = percentile(variances, p)
    mask = variances >= j
    if strict:
        mask &= variances > 0.0
    kept = np.flatnonzero(mask).astype(np.int64)
    if kept.size == 0:
        raise DataError("every feature has zero variance; strict selection keeps nothing")
    variances.setflags(write=False)
    kept.setflags(write=False)
    return VarianceSelector(float(p), variances, j, kept, ddof, strict)


def fit(data, p, ddof=0, strict=False):
    """Fit a selector on the training matrix ``data`` at percentile ``p``.

    ``strict`` additionally drops zero-variance features, which the plain
    rule keeps whenever the threshold itself is zero.
    """
    values = _matrix(data)
    if values.shape[0] == 1:
        logger.warning("fitting variance threshold on a single sample: all variances are zero")
    return select_from_variances(feature_variances(values, ddof), p, strict=strict, ddof=ddof)


def transform(selector, data):
    """Keep the selected columns of ``data`` (a FeatureMatrix or 2-D array)."""
    values = data.values if isinstance(data, FeatureMatrix) else np.asarray(data, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != selector.width:
        raise ShapeError(f"selector was fitted on width {selector.width}, got data of shape {values.shape}")
    out = values[:, selector.kept_indices]
    if isinstance(data, FeatureMatrix):
        return data.with_values(out)
    return out


def expected_kept_count(width, p):
    """Number of survivors when all ``width`` variances are distinct."""
    t = (width - 1) * p / 100.0
    return width - math.ceil(t)
