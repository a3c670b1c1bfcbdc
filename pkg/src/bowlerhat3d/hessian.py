"""Gaussian-derivative Hessian and the eigenvalue-based baseline enhancers.

Conventions: eigenvalues are sorted by magnitude, ``|l1| <= |l2| <= |l3|``;
enhancers target bright structures on a dark background, where a bright
tube has ``l2, l3 < 0``. Multiscale enhancers use ``s**2``-normalised
derivatives and take the voxel-wise maximum over scales.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DegenerateResponseWarning, InvalidParameterError

DEFAULT_SCALES = (1.0, 1.5, 2.0, 3.0, 4.0)
NEURITENESS_ALPHA = -1.0 / 3.0

# eigenvalues below this fraction of the image's peak magnitude are rounding
# residue of the convolutions and are treated as exactly zero
_EIG_FLOOR = 1e-10


def gaussian_kernels(sigma):
    """Sampled Gaussian and its first two derivatives, truncated at 4 sigma.

    The smoothing kernel is normalised to unit sum and the second-derivative
    kernel is shifted to zero sum.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma!r}")
    radius = max(1, int(math.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-x * x / (2.0 * sigma * sigma)) / (math.sqrt(2.0 * math.pi) * sigma)
    g1 = -x / sigma ** 2 * g
    g2 = (x * x / sigma ** 4 - 1.0 / sigma ** 2) * g
    g0 = g / g.sum()
    g2 = g2 - g2.mean()
    return g0, g1, g2


@dataclass
class HessianField:
    sigma: float
    h11: np.ndarray
    h22: np.ndarray
    h33: np.ndarray
    h12: np.ndarray
    h13: np.ndarray
    h23: np.ndarray
    eigenvalues: tuple = field(default=None)

    def components(self):
        return self.h11, self.h22, self.h33, self.h12, self.h13, self.h23

    def matrix_at(self, x, y, z):
        a, b, c, d, e, f = (float(h[x, y, z]) for h in self.components())
        return np.array([[a, d, e], [d, b, f], [e, f, c]])

    def eigenvectors(self):
        """Eigenvalues and eigenvectors for every voxel (Jacobi); columns of
        the last two axes are the eigenvectors, ordered like ``eigenvalues``."""
        return eigh_sym3(*self.components())


def gaussian_hessian(image, sigma, threads=1):
    """Second derivatives of the sigma-smoothed image, reflective boundaries."""
    g0, g1, g2 = gaussian_kernels(sigma)
    f = np.asarray(image, dtype=np.float64)
    if f.ndim != 3:
        raise InvalidParameterError(f"expected a 3D array, got shape {f.shape}")

    def conv(a, k, axis):
        return convolve1d(a, k, axis=axis, mode="reflect")

    # fixed evaluation order: z, then y, then x
    z0, z1, z2 = conv(f, g0, 2), conv(f, g1, 2), conv(f, g2, 2)
    y00, y10, y20 = conv(z0, g0, 1), conv(z0, g1, 1), conv(z0, g2, 1)
    y01, y11 = conv(z1, g0, 1), conv(z1, g1, 1)
    y02 = conv(z2, g0, 1)
    h11 = conv(y00, g2, 0)
    h22 = conv(y20, g0, 0)
    h33 = conv(y02, g0, 0)
    h12 = conv(y10, g1, 0)
    h13 = conv(y01, g1, 0)
    h23 = conv(y11, g0, 0)
    field_ = HessianField(sigma, h11, h22, h33, h12, h13, h23)
    field_.eigenvalues = eig_sym3(h11, h22, h33, h12, h13, h23, threads=threads)
    return field_


def _sort_by_magnitude(vals, vecs=None):
    order = np.argsort(np.abs(vals), axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    if vecs is None:
        return vals
    return vals, np.take_along_axis(vecs, order[..., None, :], axis=-1)


def _stack(h11, h22, h33, h12, h13, h23):
    comps = [np.asarray(c, dtype=np.float64) for c in (h11, h22, h33, h12, h13, h23)]
    shape = np.broadcast(*comps).shape
    a, b, c, d, e, f = (np.broadcast_to(x, shape).ravel() for x in comps)
    m = np.empty((a.size, 3, 3))
    m[:, 0, 0], m[:, 1, 1], m[:, 2, 2] = a, b, c
    m[:, 0, 1] = m[:, 1, 0] = d
    m[:, 0, 2] = m[:, 2, 0] = e
    m[:, 1, 2] = m[:, 2, 1] = f
    return m, shape


def jacobi_sym3(m, sweeps=12):
    """Cyclic Jacobi on a stack of symmetric 3x3 matrices.

    Returns unsorted eigenvalues ``(k, 3)`` and eigenvectors ``(k, 3, 3)``.
    """
    a = np.array(m, dtype=np.float64)
    k = a.shape[0]
    v = np.broadcast_to(np.eye(3), (k, 3, 3)).copy()
    for _ in range(sweeps):
        off = a[:, 0, 1] ** 2 + a[:, 0, 2] ** 2 + a[:, 1, 2] ** 2
        scale = (a * a).sum(axis=(1, 2))
        # convergence is judged per matrix so results do not depend on batching
        active = off > 1e-30 * scale
        if not active.any():
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[:, p, q]
            live = active & (apq != 0.0)
            if not live.any():
                continue
            theta = np.zeros(k)
            theta[live] = (a[live, q, q] - a[live, p, p]) / (2.0 * apq[live])
            t = np.where(live, np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)), 0.0)
            t = np.where(live & (theta == 0.0), 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rot = np.broadcast_to(np.eye(3), (k, 3, 3)).copy()
            rot[:, p, p] = c
            rot[:, q, q] = c
            rot[:, p, q] = s
            rot[:, q, p] = -s
            a = np.transpose(rot, (0, 2, 1)) @ a @ rot
            v = v @ rot
    return np.diagonal(a, axis1=1, axis2=2).copy(), v


def _trig_eigvals(m):
    """Closed-form eigenvalues; also returns a mask of near-degenerate cases."""
    q = np.trace(m, axis1=1, axis2=2) / 3.0
    p1 = m[:, 0, 1] ** 2 + m[:, 0, 2] ** 2 + m[:, 1, 2] ** 2
    p2 = (m[:, 0, 0] - q) ** 2 + (m[:, 1, 1] - q) ** 2 + (m[:, 2, 2] - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b = (m - q[:, None, None] * np.eye(3)) / safe[:, None, None]
    r = np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    norm = np.sqrt((m * m).sum(axis=(1, 2)))
    degenerate = (p <= 1e-12 * np.maximum(norm, 1e-300)) | (1.0 - np.abs(r) < 1e-12)
    return np.stack([e1, e2, e3], axis=-1), degenerate


def eig_sym3(h11, h22, h33, h12, h13, h23, threads=1):
    """Eigenvalues of symmetric 3x3 matrices given by their six components.

    Works element-wise on arrays (or scalars) and returns ``(l1, l2, l3)``
    sorted by magnitude. Uses the trigonometric closed form and falls back
    to Jacobi rotations where two eigenvalues (nearly) coincide.
    """
    m, shape = _stack(h11, h22, h33, h12, h13, h23)

    def solve(block):
        vals, degenerate = _trig_eigvals(block)
        if degenerate.any():
            vals[degenerate] = jacobi_sym3(block[degenerate])[0]
        return _sort_by_magnitude(vals)

    threads = max(1, int(threads))
    if threads == 1 or len(m) < 2 * threads:
        vals = solve(m)
    else:
        chunks = np.array_split(m, threads)
        with ThreadPoolExecutor(threads) as pool:
            vals = np.concatenate(list(pool.map(solve, chunks)))
    return tuple(vals[:, i].reshape(shape) for i in range(3))


def eigh_sym3(h11, h22, h33, h12, h13, h23):
    """Eigenvalues ``(..., 3)`` and eigenvectors ``(..., 3, 3)`` sorted by magnitude."""
    m, shape = _stack(h11, h22, h33, h12, h13, h23)
    vals, vecs = _sort_by_magnitude(*jacobi_sym3(m))
    return vals.reshape(shape + (3,)), vecs.reshape(shape + (3, 3))


@dataclass(frozen=True)
class VesselnessParams:
    alpha: float = 0.5
    beta: float = 0.5
    c: float = None
    scales: tuple = DEFAULT_SCALES

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParameterError("alpha and beta must be positive")
        if self.c is not None and not self.c > 0:
            raise InvalidParameterError("c must be positive")
        _check_scales(self.scales)


@dataclass(frozen=True)
class VolumeRatioParams:
    tau: float = 0.5
    scales: tuple = DEFAULT_SCALES

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise InvalidParameterError(f"tau must lie in (0, 1], got {self.tau!r}")
        _check_scales(self.scales)


def _check_scales(scales):
    s = tuple(scales)
    if not s or any(not x > 0 for x in s) or any(b <= a for a, b in zip(s, s[1:])):
        raise InvalidParameterError(f"scales must be positive and strictly increasing, got {s!r}")


def scaled_eigenvalues(image, sigma, threads=1):
    """Magnitude-sorted eigenvalues of the ``sigma**2``-normalised Hessian."""
    image = np.asarray(image, dtype=np.float64)
    hf = gaussian_hessian(image, sigma, threads)
    floor = _EIG_FLOOR * max(float(np.abs(image).max()), 1e-300)
    out = []
    for lam in hf.eigenvalues:
        lam = lam * sigma ** 2
        lam[np.abs(lam) < floor] = 0.0
        out.append(lam)
    return tuple(out)


def vesselness_response(l1, l2, l3, alpha=0.5, beta=0.5, c=1.0):
    """Single-scale vesselness from magnitude-sorted eigenvalues."""
    l1, l2, l3 = (np.asarray(x, dtype=np.float64) for x in (l1, l2, l3))
    zero = (l2 > 0) | (l3 > 0) | (l3 == 0) | (l2 == 0)
    den_b = np.sqrt(np.abs(l2)) * np.sqrt(np.abs(l3))
    rb = np.abs(l1) / np.where(zero, 1.0, den_b)
    ra = np.abs(l2) / np.where(zero, 1.0, np.abs(l3))
    s2 = l1 * l1 + l2 * l2 + l3 * l3
    v = (np.exp(-rb * rb / (2 * beta * beta))
         * (1 - np.exp(-ra * ra / (2 * alpha * alpha)))
         * (1 - np.exp(-s2 / (2 * c * c))))
    return np.where(zero, 0.0, v)


def vesselness(image, params=None, threads=1):
    """Multiscale Frangi vesselness (max over scales).

    When ``params.c`` is None, ``c`` is half the largest structureness
    ``S = sqrt(l1^2 + l2^2 + l3^2)`` found at each scale.
    """
    params = params or VesselnessParams()
    out = None
    for s in params.scales:
        l1, l2, l3 = scaled_eigenvalues(image, s, threads)
        c = params.c
        if c is None:
            smax = float(np.sqrt(l1 * l1 + l2 * l2 + l3 * l3).max())
            if smax == 0.0:
                v = np.zeros(l1.shape)
                out = v if out is None else np.maximum(out, v)
                continue
            c = 0.5 * smax
        v = vesselness_response(l1, l2, l3, params.alpha, params.beta, c)
        out = v if out is None else np.maximum(out, v)
    return out.astype(np.float32)


def _neuriteness(l1, l2, l3, alpha):
    l1, l2, l3 = (np.asarray(x, dtype=np.float64) for x in (l1, l2, l3))
    mixed = np.stack([l1 + alpha * (l2 + l3),
                      l2 + alpha * (l1 + l3),
                      l3 + alpha * (l1 + l2)], axis=-1)
    mag = np.abs(mixed)
    top = mag.max(axis=-1, keepdims=True)
    # signed value of largest magnitude; a +/- tie resolves to the negative one
    lmax = np.where(mag == top, mixed, np.inf).min(axis=-1)
    lmin = float(lmax.min())
    if lmin >= 0.0:
        return np.zeros(lmax.shape), True
    return np.where(lmax < 0, lmax / lmin, 0.0), False


def _warn_degenerate():
    warnings.warn("neuriteness: no voxel has a negative dominant eigenvalue; returning zeros",
                  DegenerateResponseWarning, stacklevel=3)


def neuriteness_from_eigenvalues(l1, l2, l3, alpha=NEURITENESS_ALPHA):
    """Neuriteness from eigenvalues of one scale.

    Each eigenvalue is mixed with ``alpha`` times the sum of the other two;
    the mixed value of largest magnitude is divided by its most negative
    value over the whole volume, and positive values score zero.
    """
    out, degenerate = _neuriteness(l1, l2, l3, alpha)
    if degenerate:
        _warn_degenerate()
    return out


def neuriteness(image, sigma, alpha=NEURITENESS_ALPHA, threads=1):
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma!r}")
    out, degenerate = _neuriteness(*scaled_eigenvalues(image, sigma, threads), alpha)
    if degenerate:
        _warn_degenerate()
    return out.astype(np.float32)


def neuriteness_multiscale(image, scales=DEFAULT_SCALES, alpha=NEURITENESS_ALPHA, threads=1):
    """Maximum of the single-scale neuriteness maps over ``scales``."""
    _check_scales(scales)
    out = None
    all_degenerate = True
    for s in scales:
        n, degenerate = _neuriteness(*scaled_eigenvalues(image, s, threads), alpha)
        all_degenerate &= degenerate
        out = n if out is None else np.maximum(out, n)
    if all_degenerate:
        _warn_degenerate()
    return out.astype(np.float32)


def regularized_lambda(l3, tau):
    """Regularise the largest eigenvalue against tau times its volume maximum."""
    l3 = np.asarray(l3, dtype=np.float64)
    cut = tau * float(l3.max())
    return np.where(l3 > cut, l3, np.where(l3 > 0, cut, 0.0))


def volume_ratio_response(l2, lrho):
    """Regularised volume ratio for (sign-flipped) eigenvalues; lies in [0, 1]."""
    l2 = np.asarray(l2, dtype=np.float64)
    lrho = np.asarray(lrho, dtype=np.float64)
    off = (l2 <= 0) | (lrho <= 0)
    full = ~off & (2.0 * l2 >= lrho)
    den = np.where(off | full, 1.0, l2 + lrho)
    r = l2 / den  # bounded ratios avoid under/overflow of den**3
    mid = 27.0 * r * r * ((lrho - l2) / den)
    return np.where(off, 0.0, np.where(full, 1.0, mid))


def volume_ratio(image, params=None, threads=1):
    """Multiscale regularised volume ratio for bright structures."""
    params = params or VolumeRatioParams()
    out = None
    for s in params.scales:
        _, l2, l3 = scaled_eigenvalues(image, s, threads)
        # bright vessels have negative l2, l3; flip so the positive branch fires
        l2, l3 = -l2, -l3
        v = volume_ratio_response(l2, regularized_lambda(l3, params.tau))
        out = v if out is None else np.maximum(out, v)
    return out.astype(np.float32)
