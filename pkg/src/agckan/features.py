"""Window statistics and feature standardization.

Each 3 x n window maps to 18 features ordered as: for dp_tie, df1, df2 in
turn, (mean, std, min, max, skew, kurtosis).  Conventions: std uses the
n-1 divisor; skewness is Fisher-Pearson g1 = m3 / m2^1.5 and kurtosis is
excess g2 = m4 / m2^2 - 3 with central moments over n; a constant series
gets skew = kurt = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .simulator import TimeSeriesSample

_STATS = ("mean", "std", "min", "max", "skew", "kurt")
_PREFIXES = ("ptie", "df1", "df2")
FEATURE_NAMES = tuple(f"{p}_{s}" for p in _PREFIXES for s in _STATS)
N_FEATURES = len(FEATURE_NAMES)

FEATURE_DESCRIPTIONS = tuple(
    f"{s_long} of {sig}"
    for sig in ("dPtie", "dF1", "dF2")
    for s_long in ("mean", "std", "min", "max", "skew", "kurtosis"))


def _series_stats(x):
    n = x.size
    mean = x.mean()
    d = x - mean
    m2 = np.mean(d * d)
    m3 = np.mean(d ** 3)
    m4 = np.mean(d ** 4)
    std = np.sqrt(np.sum(d * d) / (n - 1))
    if m2 <= 0.0:
        skew = 0.0
        kurt = 0.0
    else:
        skew = m3 / m2 ** 1.5
        kurt = m4 / (m2 * m2) - 3.0
    return mean, std, x.min(), x.max(), skew, kurt


def extract_features(sample) -> np.ndarray:
    """18-element feature vector for a sample (or a raw (3, n) matrix)."""
    values = sample.values if isinstance(sample, TimeSeriesSample) else np.asarray(sample, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != 3 or values.shape[1] < 2:
        raise InvalidArgumentError("expected a (3, n) window with n >= 2")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("window contains non-finite values")
    out = np.empty(N_FEATURES)
    for s in range(3):
        out[6 * s:6 * s + 6] = _series_stats(values[s])
    return out


def extract_feature_matrix(samples) -> np.ndarray:
    return np.stack([extract_features(s) for s in samples])


@dataclass
class Standardizer:
    """Per-feature affine transform fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features) -> "Standardizer":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise InvalidArgumentError("need a non-empty 2-D feature matrix")
        mean = features.mean(axis=0)
        if features.shape[0] > 1:
            std = features.std(axis=0, ddof=1)
        else:
            std = np.zeros(features.shape[1])
        std = np.where(std > 0, std, 1.0)  # constant features pass through centred
        return cls(mean=mean, std=std)

    def transform(self, fv):
        return (np.asarray(fv, dtype=np.float64) - self.mean) / self.std

    def inverse(self, fv):
        return np.asarray(fv, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.array(d["mean"]), std=np.array(d["std"]))


def export_features_csv(features, labels, path, manifest_digest=None):
    """Features CSV: named columns plus label, full float64 text precision."""
    features = np.asarray(features)
    labels = np.asarray(labels)
    with open(path, "w", encoding="utf-8") as fh:
        if manifest_digest:
            fh.write(f"# manifest_digest={manifest_digest}\n")
        fh.write(",".join(FEATURE_NAMES) + ",label\n")
        for row, lab in zip(features, labels):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(lab)}\n")


def read_features_csv(path):
    rows, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                if tuple(header[:-1]) != FEATURE_NAMES or header[-1] != "label":
                    raise InvalidArgumentError("unexpected features CSV header")
                continue
            parts = line.split(",")
            rows.append([float(v) for v in parts[:-1]])
            labels.append(int(parts[-1]))
    return np.array(rows), np.array(labels)
