"""Flat grayscale 3D morphology and structuring-element generators.

Structuring elements are sets of integer offsets ``(dx, dy, dz)`` that contain
the origin and are symmetric under negation, so erosion and dilation are
plain neighbourhood min/max without reflection. Offsets falling outside the
volume are ignored (the min/max runs over the in-bounds part of the window).

The kernels pad with +/-inf, which is exactly equivalent to ignoring
out-of-bounds offsets because the origin is always in the window. Offsets
sharing ``(dy, dz)`` are grouped into contiguous runs along x and each run is
evaluated with a van Herk/Gil-Werman running min/max, so a ball of diameter
``d`` costs O(d^2) shifted passes instead of O(d^3).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class StructuringElement:
    offsets: np.ndarray
    kind: str = "custom"
    length: int = 0
    direction: tuple = field(default=None)

    def __post_init__(self):
        offs = np.unique(np.asarray(self.offsets, dtype=np.int64).reshape(-1, 3), axis=0)
        if len(offs) == 0 or not (offs == 0).all(axis=1).any():
            raise InvalidParameterError("structuring element must contain the origin")
        if not np.array_equal(offs, np.unique(-offs, axis=0)):
            raise InvalidParameterError("structuring element must be symmetric under negation")
        offs.flags.writeable = False
        object.__setattr__(self, "offsets", offs)

    def __len__(self):
        return len(self.offsets)

    def as_set(self):
        return {tuple(int(c) for c in o) for o in self.offsets}

    @property
    def extent(self):
        """Largest absolute offset along each axis."""
        return tuple(int(m) for m in np.abs(self.offsets).max(axis=0))


@dataclass(frozen=True)
class DirectionSet:
    vectors: np.ndarray
    angles: tuple

    @property
    def n(self):
        return len(self.vectors)

    def min_angle(self):
        """Smallest angle in degrees between any two line orientations."""
        if self.n < 2:
            return 180.0
        dots = np.abs(self.vectors @ self.vectors.T)
        np.fill_diagonal(dots, 0.0)
        return math.degrees(math.acos(min(1.0, dots.max())))


def make_sphere_se(d):
    """Closed Euclidean ball of diameter ``d`` (odd) centred on the origin."""
    if int(d) != d or d < 1 or d % 2 == 0:
        raise InvalidParameterError(f"sphere diameter must be an odd positive integer, got {d!r}")
    d = int(d)
    h = d // 2
    g = np.arange(-h, h + 1)
    dx, dy, dz = np.meshgrid(g, g, g, indexing="ij")
    inside = 4 * (dx * dx + dy * dy + dz * dz) <= d * d
    offsets = np.stack([dx[inside], dy[inside], dz[inside]], axis=1)
    return StructuringElement(offsets, kind="sphere", length=d)


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def make_line_se(d, v):
    """Digital centred segment of ``d`` samples along unit vector ``v``.

    ``d`` must be odd so that the centre sample is the origin.
    """
    if int(d) != d or d < 1 or d % 2 == 0:
        raise InvalidParameterError(f"line length must be an odd positive integer, got {d!r}")
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise InvalidParameterError("line direction must be non-zero")
    if abs(norm - 1.0) > 1e-9:
        raise InvalidParameterError(f"line direction must be a unit vector, |v| = {norm}")
    # orientation-canonical so that v and -v give bit-identical samples
    if tuple(-v) > tuple(v):
        v = -v
    t = np.arange(int(d), dtype=np.float64) - (int(d) - 1) / 2.0
    offsets = _round_half_away(t[:, None] * v[None, :]).astype(np.int64)
    return StructuringElement(offsets, kind="line", length=int(d), direction=tuple(v))


def make_direction_set(n):
    """``n`` line orientations from a golden-angle spiral on the upper hemisphere.

    Point ``k`` sits at height ``z = 1 - k/n`` and azimuth ``k`` times the golden
    angle, so the first direction is the pole and no two are antipodal.
    """
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"direction count must be >= 1, got {n!r}")
    k = np.arange(int(n), dtype=np.float64)
    z = 1.0 - k / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.mod(k * GOLDEN_ANGLE, 2 * math.pi)
    vectors = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    theta = np.arccos(np.clip(vectors[:, 2], -1.0, 1.0))
    vectors.flags.writeable = False
    return DirectionSet(vectors, tuple(zip(theta.tolist(), phi.tolist())))


def running_extremum(a, width, op):
    """van Herk/Gil-Werman running min or max along axis 0.

    Returns ``out`` with ``out[i] = op(a[i:i + width])`` for
    ``i = 0 .. len(a) - width``.
    """
    n = a.shape[0]
    if width == 1:
        return a
    if width > n:
        raise ValueError("window wider than the array")
    blocks = -(-n // width)
    fill = np.inf if op is np.minimum else -np.inf
    padded = np.full((blocks * width,) + a.shape[1:], fill, dtype=a.dtype)
    padded[:n] = a
    shaped = padded.reshape((blocks, width) + a.shape[1:])
    prefix = op.accumulate(shaped, axis=1).reshape(padded.shape)
    suffix = op.accumulate(shaped[:, ::-1], axis=1)[:, ::-1].reshape(padded.shape)
    m = n - width + 1
    return op(suffix[:m], prefix[width - 1:width - 1 + m])


def _x_runs(offsets):
    """Group offsets into maximal x-runs: yields (dy, dz, x_start, width)."""
    groups = {}
    for dx, dy, dz in offsets.tolist():
        groups.setdefault((dy, dz), []).append(dx)
    runs = []
    for (dy, dz), xs in sorted(groups.items()):
        xs.sort()
        start = prev = xs[0]
        for x in xs[1:] + [None]:
            if x is not None and x == prev + 1:
                prev = x
                continue
            runs.append((dy, dz, start, prev - start + 1))
            if x is not None:
                start = prev = x
    return runs


def _rank_valid(padded, runs, margin, out_shape, op):
    """Evaluate the filter for every output voxel from an already padded block."""
    mx, my, mz = margin
    nx, ny, nz = out_shape
    fill = np.inf if op is np.minimum else -np.inf
    out = np.full(out_shape, fill, dtype=padded.dtype)
    cache = {}
    for dy, dz, x0, w in runs:
        if w not in cache:
            cache[w] = running_extremum(padded, w, op)
        r = cache[w]
        op(out, r[mx + x0:mx + x0 + nx, my + dy:my + dy + ny, mz + dz:mz + dz + nz], out=out)
    return out


def _rank_filter(image, se, op, threads):
    a = np.asarray(image, dtype=np.float32)
    if a.ndim != 3:
        raise InvalidParameterError(f"expected a 3D array, got shape {a.shape}")
    if len(se) == 1:
        return a.copy()
    margin = se.extent
    fill = np.inf if op is np.minimum else -np.inf
    padded = np.pad(a, [(m, m) for m in margin], mode="constant", constant_values=fill)
    runs = _x_runs(se.offsets)
    nz = a.shape[2]
    threads = max(1, min(int(threads), nz))
    if threads == 1:
        return _rank_valid(padded, runs, margin, a.shape, op)
    # disjoint z-slabs; each voxel is computed by exactly one worker
    edges = np.linspace(0, nz, threads + 1).astype(int)
    mz = margin[2]

    def slab(i):
        z0, z1 = edges[i], edges[i + 1]
        return _rank_valid(padded[:, :, z0:z1 + 2 * mz], runs, margin,
                           (a.shape[0], a.shape[1], z1 - z0), op)

    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(slab, range(threads)))
    return np.concatenate(parts, axis=2)


def erode(image, se, threads=1):
    return _rank_filter(image, se, np.minimum, threads)


def dilate(image, se, threads=1):
    return _rank_filter(image, se, np.maximum, threads)


def opening(image, se, threads=1):
    return dilate(erode(image, se, threads), se, threads)


def closing(image, se, threads=1):
    return erode(dilate(image, se, threads), se, threads)


def top_hat(image, se, threads=1):
    a = np.asarray(image, dtype=np.float32)
    return a - opening(a, se, threads)


def bottom_hat(image, se, threads=1):
    """Image minus its closing; non-positive everywhere."""
    a = np.asarray(image, dtype=np.float32)
    return a - closing(a, se, threads)
