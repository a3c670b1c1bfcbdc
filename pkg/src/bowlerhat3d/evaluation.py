"""ROC/AUC scoring, PSNR and line-profile analysis."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import (DegenerateTruthError, InvalidParameterError, NoPeakError,
                     ShapeMismatchError)

DEFAULT_THRESHOLDS = 1024


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "fpr", "tpr"])
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                w.writerow([repr(float(t)), repr(float(f)), repr(float(p))])
            fh.write(f"# auc={self.auc!r}\n")


@dataclass(frozen=True)
class Profile:
    positions: np.ndarray
    values: np.ndarray
    p0: tuple
    p1: tuple
    provenance: str = ""

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "intensity"])
            for x, v in zip(self.positions, self.values):
                w.writerow([repr(float(x)), repr(float(v))])

    def peak_position(self):
        """Mean position of the samples that attain the maximum."""
        top = self.values.max()
        return float(self.positions[self.values == top].mean())


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"volume dims differ: {a.shape} vs {b.shape}")


def roc(scores, truth, n_thresholds=DEFAULT_THRESHOLDS):
    """ROC curve of normalised scores against a binary ground truth.

    Uses ``n_thresholds + 1`` evenly spaced thresholds from 1 down to 0; a
    voxel counts as positive when ``score >= threshold``. The AUC is the
    trapezoidal area with the curve anchored at (0, 0).
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truth)
    _check_same_shape(s, t)
    if n_thresholds < 1:
        raise InvalidParameterError("n_thresholds must be >= 1")
    if not np.isin(t, (0, 1)).all():
        raise InvalidParameterError("truth must be binary (0/1)")
    pos = np.sort(s[t == 1], axis=None)
    neg = np.sort(s[t == 0], axis=None)
    if pos.size == 0 or neg.size == 0:
        raise DegenerateTruthError("ground truth must contain both classes")
    thresholds = np.linspace(1.0, 0.0, n_thresholds + 1)
    tpr = (pos.size - np.searchsorted(pos, thresholds, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg, thresholds, side="left")) / neg.size
    xs = np.concatenate([[0.0], fpr])
    ys = np.concatenate([[0.0], tpr])
    auc = float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


def auc_table(methods, truth, n_thresholds=DEFAULT_THRESHOLDS):
    """Rows ``(name, auc)`` sorted by descending AUC.

    ``methods`` maps method names to normalised score volumes (a dict or a
    sequence of pairs).
    """
    items = list(methods.items()) if hasattr(methods, "items") else list(methods)
    if not items:
        raise InvalidParameterError("auc_table needs at least one method")
    rows = [(name, roc(scores, truth, n_thresholds).auc) for name, scores in items]
    return sorted(rows, key=lambda r: -r[1])


def write_auc_table(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "auc"])
        for name, auc in rows:
            w.writerow([name, repr(float(auc))])


def psnr(reference, test, peak=255.0):
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    if not peak > 0:
        raise InvalidParameterError("peak must be positive")
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    _check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def extract_profile(image, p0, p1, n_samples, provenance=""):
    """Trilinearly interpolated samples on the segment ``p0 -> p1``."""
    a = np.asarray(image, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    if n_samples < 2:
        raise InvalidParameterError("n_samples must be >= 2")
    hi = np.asarray(a.shape) - 1
    for p in (p0, p1):
        if np.any(p < 0) or np.any(p > hi):
            raise InvalidParameterError(f"profile endpoint {p.tolist()} lies outside the volume")
    if np.array_equal(p0, p1):
        raise InvalidParameterError("profile endpoints must differ")
    f = np.linspace(0.0, 1.0, n_samples)
    pts = p0[:, None] + (p1 - p0)[:, None] * f[None, :]
    values = map_coordinates(a, pts, order=1, mode="nearest")
    positions = f * float(np.linalg.norm(p1 - p0))
    return Profile(positions, values, tuple(p0.tolist()), tuple(p1.tolist()), provenance)


def fwhm(profile):
    """Full width at half maximum above the endpoint baseline.

    The baseline is the mean of the two end samples; crossings of the
    half-maximum level are located by linear interpolation on either side
    of the peak.
    """
    x = np.asarray(profile.positions, dtype=np.float64)
    y = np.asarray(profile.values, dtype=np.float64)
    base = 0.5 * (y[0] + y[-1])
    top = y.max()
    if not top > base:
        raise NoPeakError("profile has no maximum above its baseline")
    half = base + 0.5 * (top - base)
    peak = int(np.argmax(y))
    i = peak
    while i > 0 and y[i - 1] >= half:
        i -= 1
    j = peak
    while j < len(y) - 1 and y[j + 1] >= half:
        j += 1
    if i == 0 or j == len(y) - 1:
        raise NoPeakError("profile does not fall below half maximum on both sides")

    def cross(k_out, k_in):
        return x[k_out] + (half - y[k_out]) * (x[k_in] - x[k_out]) / (y[k_in] - y[k_out])

    return float(cross(j + 1, j) - cross(i - 1, i))
