"""Multiscale 3D bowler-hat transform.

For every odd diameter ``d <= d_max`` the image is opened with a ball of
diameter ``d`` and, separately, with line segments of ``d`` samples along
each of ``n_directions`` orientations (maximum over orientations). The
enhancement is the largest per-scale excess of the line opening over the
ball opening:

    out(p) = max_d max(0, line_d(p) - sphere_d(p))

Elongated bright structures survive long line openings but not wide ball
openings, so they light up; blobs survive both and background survives
neither.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, ShapeMismatchError
from .morphology import make_direction_set, make_line_se, make_sphere_se, opening


@dataclass(frozen=True)
class BowlerHatParams:
    d_max: int = 9
    n_directions: int = 32

    def __post_init__(self):
        if int(self.d_max) != self.d_max or self.d_max < 1 or self.d_max % 2 == 0:
            raise InvalidParameterError(f"d_max must be an odd positive integer, got {self.d_max!r}")
        if int(self.n_directions) != self.n_directions or self.n_directions < 1:
            raise InvalidParameterError(f"n_directions must be >= 1, got {self.n_directions!r}")

    @property
    def scales(self):
        return tuple(range(1, int(self.d_max) + 1, 2))


@dataclass(frozen=True)
class ScaleBank:
    scales: tuple
    volumes: tuple
    params: BowlerHatParams

    def __getitem__(self, d):
        return self.volumes[self.scales.index(d)]


def _line_opening_max(image, d, vectors, threads):
    """Pixel-wise maximum of line openings over all orientations."""
    if d == 1:
        return np.asarray(image, dtype=np.float32).copy()
    ses = [make_line_se(d, v) for v in vectors]
    # identical digitisations (common at short lengths) need only be opened once
    unique = list({se.offsets.tobytes(): se for se in ses}.values())

    def worker(group):
        acc = None
        for se in group:
            o = opening(image, se)
            acc = o if acc is None else np.maximum(acc, o, out=acc)
        return acc

    threads = max(1, min(int(threads), len(unique)))
    if threads == 1:
        return worker(unique)
    groups = [unique[i::threads] for i in range(threads)]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(worker, groups))
    out = parts[0]
    for p in parts[1:]:
        np.maximum(out, p, out=out)
    return out


def sphere_bank(image, params, threads=1):
    image = np.asarray(image, dtype=np.float32)
    vols = tuple(opening(image, make_sphere_se(d), threads) for d in params.scales)
    return ScaleBank(params.scales, vols, params)


def line_bank(image, params, threads=1):
    image = np.asarray(image, dtype=np.float32)
    vectors = make_direction_set(params.n_directions).vectors
    vols = tuple(_line_opening_max(image, d, vectors, threads) for d in params.scales)
    return ScaleBank(params.scales, vols, params)


def bowler_hat_from_banks(spheres, lines):
    """Combine materialised banks; they must cover identical scales and dims."""
    if spheres.scales != lines.scales:
        raise ShapeMismatchError(f"scale lists differ: {spheres.scales} vs {lines.scales}")
    shapes = {v.shape for v in spheres.volumes + lines.volumes}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"bank volumes have differing shapes {sorted(shapes)}")
    out = np.zeros(shapes.pop(), dtype=np.float32)
    for s, l in zip(spheres.volumes, lines.volumes):
        np.maximum(out, l - s, out=out)
    return out


def bowler_hat(image, params=None, threads=1):
    """Bowler-hat enhancement, streamed one scale at a time.

    Parameters
    ----------
    image : array_like
        3D volume indexed ``[x, y, z]``; bright vessels on dark background.
    params : BowlerHatParams, optional
        ``d_max`` (odd, voxels) and number of line orientations.
    threads : int
        Worker threads for the orientation loop. The result is bit-identical
        for any value.

    Returns
    -------
    numpy.ndarray
        Non-negative float32 response, same shape as ``image``.
    """
    params = params or BowlerHatParams()
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3:
        raise InvalidParameterError(f"expected a 3D array, got shape {image.shape}")
    vectors = make_direction_set(params.n_directions).vectors
    out = np.zeros(image.shape, dtype=np.float32)
    for d in params.scales:
        if d == 1:
            continue  # both openings are the identity; the difference is 0
        sphere = opening(image, make_sphere_se(d), threads)
        line = _line_opening_max(image, d, vectors, threads)
        np.maximum(out, line - sphere, out=out)
    return out
