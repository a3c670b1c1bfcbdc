"""Synthetic ground-truthed phantoms and noise models.

Every structure is a union of capsules: a voxel is foreground when its centre
lies within ``diameter / 2`` of a medial segment (a ball is a zero-length
segment). Intensities of noise models follow the 0-255 convention.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import GeometryError, InvalidParameterError, PhantomSpecError

KINDS = ("tube", "yjunction", "xcrossing", "ball", "composite")
NOISE_MODELS = ("gaussian", "speckle", "saltpepper")
RNG_NAME = "numpy.random.Generator(PCG64)"


def _vec(p, name):
    try:
        v = np.asarray(p, dtype=np.float64).reshape(3)
    except (TypeError, ValueError):
        raise PhantomSpecError(f"{name} must be a 3-vector, got {p!r}") from None
    return v


@dataclass(frozen=True)
class Tube:
    p0: tuple
    p1: tuple
    diameter: float

    def segments(self):
        return [(_vec(self.p0, "p0"), _vec(self.p1, "p1"), self.diameter / 2.0)]


@dataclass(frozen=True)
class Ball:
    center: tuple
    diameter: float

    def segments(self):
        c = _vec(self.center, "center")
        return [(c, c, self.diameter / 2.0)]


@dataclass(frozen=True)
class YJunction:
    """Branches of ``length`` voxels leaving ``center`` along ``directions``."""

    center: tuple
    directions: tuple
    length: float
    diameter: float

    def segments(self):
        c = _vec(self.center, "center")
        segs = []
        for d in self.directions:
            u = _vec(d, "direction")
            n = np.linalg.norm(u)
            if n == 0:
                raise PhantomSpecError("branch direction must be non-zero")
            segs.append((c, c + self.length * u / n, self.diameter / 2.0))
        return segs


@dataclass(frozen=True)
class XCrossing:
    """Two tubes, each given as a ``(p0, p1)`` axis."""

    axes: tuple
    diameter: float

    def segments(self):
        if len(self.axes) != 2:
            raise PhantomSpecError("xcrossing needs exactly two axes")
        return [(_vec(a, "axis start"), _vec(b, "axis end"), self.diameter / 2.0)
                for a, b in self.axes]


@dataclass(frozen=True)
class Composite:
    items: tuple

    def segments(self):
        return [s for item in self.items for s in item.segments()]


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple
    kind: object
    foreground: float = 1.0
    background: float = 0.0
    softness: float = 0.0

    def __post_init__(self):
        dims = tuple(self.dims)
        if len(dims) != 3 or any(int(n) != n or n < 1 for n in dims):
            raise PhantomSpecError(f"dims must be three positive integers, got {self.dims!r}")
        object.__setattr__(self, "dims", tuple(int(n) for n in dims))
        if self.softness < 0:
            raise PhantomSpecError("softness must be >= 0")


def _structure_from_dict(doc):
    kind = doc.get("kind")
    try:
        if kind == "tube":
            return Tube(tuple(doc["p0"]), tuple(doc["p1"]), float(doc["diameter"]))
        if kind == "ball":
            return Ball(tuple(doc["center"]), float(doc["diameter"]))
        if kind == "yjunction":
            return YJunction(tuple(doc["center"]), tuple(tuple(d) for d in doc["directions"]),
                             float(doc["length"]), float(doc["diameter"]))
        if kind == "xcrossing":
            return XCrossing(tuple((tuple(a), tuple(b)) for a, b in doc["axes"]),
                             float(doc["diameter"]))
        if kind == "composite":
            return Composite(tuple(_structure_from_dict(d) for d in doc["items"]))
    except KeyError as exc:
        raise PhantomSpecError(f"{kind} structure is missing field {exc}") from None
    raise PhantomSpecError(f"unknown phantom kind {kind!r}; expected one of {KINDS}")


def spec_from_dict(doc):
    """Build a PhantomSpec from its JSON form.

    Example: ``{"dims": [64, 64, 64], "kind": "tube", "p0": [32, 32, 12],
    "p1": [32, 32, 52], "diameter": 5}``; composites carry an ``items`` list.
    """
    if "dims" not in doc:
        raise PhantomSpecError("phantom spec is missing 'dims'")
    return PhantomSpec(dims=tuple(doc["dims"]), kind=_structure_from_dict(doc),
                       foreground=float(doc.get("foreground", 1.0)),
                       background=float(doc.get("background", 0.0)),
                       softness=float(doc.get("softness", 0.0)))


def load_spec(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PhantomSpecError(f"{path}: invalid JSON at line {exc.lineno}, "
                               f"column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(doc)


def _check_bounds(segments, dims):
    hi = np.asarray(dims, dtype=np.float64) - 0.5
    for a, b, r in segments:
        if r < 0.5:
            raise PhantomSpecError(f"diameter must be >= 1, got {2 * r}")
        for p in (a, b):
            if np.any(p - r < -0.5) or np.any(p + r > hi):
                raise GeometryError(f"structure at {p.tolist()} with radius {r} "
                                    f"does not fit inside dims {tuple(dims)}")


def capsule_mask(dims, segments):
    """Voxels whose centre is within ``r`` of any segment ``(a, b, r)``."""
    nx, ny, nz = dims
    grid = np.stack(np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                indexing="ij"), axis=-1).astype(np.float64)
    mask = np.zeros(dims, dtype=bool)
    for a, b, r in segments:
        ab = b - a
        L2 = float(ab @ ab)
        rel = grid - a
        if L2 == 0.0:
            t = np.zeros(dims)
        else:
            t = np.clip(rel @ ab / L2, 0.0, 1.0)
        diff = rel - t[..., None] * ab
        mask |= np.einsum("...i,...i->...", diff, diff) <= r * r
    return mask


def generate_phantom(spec):
    """Return ``(image, ground_truth)`` as float32 arrays indexed ``[x, y, z]``."""
    segments = spec.kind.segments()
    _check_bounds(segments, spec.dims)
    truth = capsule_mask(spec.dims, segments).astype(np.float32)
    image = spec.background + (spec.foreground - spec.background) * truth.astype(np.float64)
    if spec.softness > 0:
        image = gaussian_filter(image, spec.softness, mode="nearest")
    return image.astype(np.float32), truth


def add_illumination_ramp(image, gradient, amplitude):
    """Add ``amplitude * (g . p)`` with each coordinate of ``p`` scaled to [0, 1]."""
    a = np.asarray(image, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64).reshape(3)
    ramp = np.zeros(a.shape)
    for axis, n in enumerate(a.shape):
        if g[axis] == 0 or n == 1:
            continue
        shape = [1, 1, 1]
        shape[axis] = n
        ramp = ramp + g[axis] * (np.arange(n) / (n - 1)).reshape(shape)
    return (a + amplitude * ramp).astype(np.float32)


@dataclass(frozen=True)
class NoiseSpec:
    """``sigma`` is on the 0-255 scale; ``rho`` is the salt-and-pepper density."""

    model: str
    sigma: float = 0.0
    rho: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise InvalidParameterError(f"unknown noise model {self.model!r}; "
                                        f"expected one of {NOISE_MODELS}")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be >= 0")
        if not 0 <= self.rho <= 1:
            raise InvalidParameterError(f"rho must lie in [0, 1], got {self.rho!r}")


def add_noise(image, spec):
    """Corrupt ``image`` (0-255 scale) and clamp to [0, 255].

    Random draws are taken in x-fastest flat order from a PCG64 generator
    seeded with ``spec.seed``, so results are reproducible bit for bit.
    A zero noise level returns the input unchanged.
    """
    a = np.asarray(image, dtype=np.float32)
    level = spec.rho if spec.model == "saltpepper" else spec.sigma
    if level == 0:
        return a.copy()
    rng = np.random.default_rng(spec.seed)
    flat = a.ravel(order="F").astype(np.float64)
    if spec.model == "gaussian":
        flat = flat + rng.normal(0.0, spec.sigma, flat.size)
    elif spec.model == "speckle":
        flat = flat + flat * rng.normal(0.0, spec.sigma / 255.0, flat.size)
    else:
        k = int(round(spec.rho * flat.size))
        idx = rng.choice(flat.size, size=k, replace=False)
        flat[idx] = 255.0 * rng.integers(0, 2, size=k)
    flat = np.clip(flat, 0.0, 255.0)
    return flat.reshape(a.shape, order="F").astype(np.float32)
