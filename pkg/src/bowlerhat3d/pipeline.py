"""Method dispatch, standard phantoms and experiment drivers.

The phantom builders here fix the geometry used by the desk-scale
comparisons (junction, profile, illumination, noise and AUC ranking runs).
"""

import math

import numpy as np

from .bowlerhat import BowlerHatParams, bowler_hat
from .errors import UnknownMethodError
from .evaluation import psnr, roc
from .hessian import (DEFAULT_SCALES, NEURITENESS_ALPHA, VesselnessParams,
                      VolumeRatioParams, neuriteness_multiscale, vesselness,
                      volume_ratio)
from .phantom import (Ball, Composite, NoiseSpec, PhantomSpec, Tube, YJunction,
                      add_noise, generate_phantom)
from .volume import normalize

METHODS = ("bowlerhat", "vesselness", "neuriteness", "volumeratio")


def enhance(image, method, d_max=9, n_directions=32, scales=DEFAULT_SCALES,
            alpha=None, beta=0.5, c=None, tau=0.5, threads=1):
    """Run one enhancer and return its response normalised to [0, 1].

    ``alpha`` defaults to 0.5 for vesselness and -1/3 for neuriteness.
    """
    scales = tuple(float(s) for s in scales)
    if method == "bowlerhat":
        out = bowler_hat(image, BowlerHatParams(d_max, n_directions), threads)
    elif method == "vesselness":
        p = VesselnessParams(alpha=0.5 if alpha is None else alpha, beta=beta, c=c, scales=scales)
        out = vesselness(image, p, threads)
    elif method == "neuriteness":
        a = NEURITENESS_ALPHA if alpha is None else alpha
        out = neuriteness_multiscale(image, scales, a, threads)
    elif method == "volumeratio":
        out = volume_ratio(image, VolumeRatioParams(tau=tau, scales=scales), threads)
    else:
        raise UnknownMethodError(f"unknown method {method!r}; expected one of {METHODS}")
    return normalize(out)


def _unit(theta_deg, phi_deg=90.0):
    t, p = math.radians(theta_deg), math.radians(phi_deg)
    return (math.sin(p) * math.cos(t), math.sin(p) * math.sin(t), math.cos(p))


def tube_phantom(n=64, diameter=5, length=40, foreground=1.0, softness=0.0):
    """Straight tube along z through voxel ``(n//2, n//2)`` of an ``n**3`` volume."""
    c = float(n // 2)
    spec = PhantomSpec((n, n, n), Tube((c, c, c - length / 2), (c, c, c + length / 2), diameter),
                       foreground=foreground, softness=softness)
    return generate_phantom(spec)


def y_junction_phantom(n=64, diameter=5, length=24, foreground=1.0):
    """Three in-plane branches 120 degrees apart meeting at the volume centre.

    Returns ``(image, truth, junction_voxel, mid_branch_voxel)``.
    """
    c = n // 2
    dirs = tuple(_unit(a) for a in (90.0, 210.0, 330.0))
    spec = PhantomSpec((n, n, n), YJunction((c, c, c), dirs, length, diameter),
                       foreground=foreground)
    image, truth = generate_phantom(spec)
    u = np.asarray(dirs[0])
    mid = tuple(int(round(c + 0.5 * length * x)) for x in u)
    return image, truth, (c, c, c), mid


def composite_structures():
    """Three tubes (d = 3, 5, 7), a Y-junction (d = 5) and a d = 9 ball in 96^3."""
    return Composite((
        Tube((8.0, 10.0, 14.0), (86.0, 34.0, 22.0), 3),
        Tube((12.0, 84.0, 10.0), (84.0, 70.0, 84.0), 5),
        Tube((74.0, 10.0, 40.0), (66.0, 46.0, 86.0), 7),
        YJunction((34.0, 46.0, 58.0), (_unit(20.0, 80.0), _unit(140.0, 100.0), _unit(260.0, 70.0)),
                  22.0, 5),
        Ball((22.0, 22.0, 78.0), 9),
    ))


def composite_phantom(sigma=10.0, seed=0):
    """Composite phantom on the 0-255 scale with additive Gaussian noise."""
    spec = PhantomSpec((96, 96, 96), composite_structures(), foreground=255.0)
    image, truth = generate_phantom(spec)
    noisy = add_noise(image, NoiseSpec("gaussian", sigma=sigma, seed=seed))
    return noisy, truth


def fiber_structures():
    """Thin crossing fibres (d = 3) in a 64^3 volume."""
    return Composite((
        Tube((6.0, 8.0, 10.0), (58.0, 50.0, 20.0), 3),
        Tube((8.0, 56.0, 12.0), (56.0, 14.0, 52.0), 3),
        Tube((32.0, 6.0, 56.0), (30.0, 58.0, 30.0), 3),
        Tube((10.0, 30.0, 54.0), (54.0, 34.0, 44.0), 3),
    ))


def fiber_phantom():
    """Dim, slightly blurred fibres on a grey floor, 0-255 scale."""
    spec = PhantomSpec((64, 64, 64), fiber_structures(), foreground=100.0, background=20.0,
                       softness=0.7)
    return generate_phantom(spec)


def noise_sweep(image, truth, levels, seed=0, d_max=9, n_directions=32, threads=1,
                n_thresholds=1024):
    """Bowler-hat AUC under increasing noise.

    ``image`` is on the 0-255 scale; ``levels`` is a sequence of
    ``(model, level)`` pairs (``sigma`` for gaussian/speckle, ``rho`` for
    saltpepper). Returns dict rows with the AUC and the PSNR of the noisy
    input against the clean one.
    """
    rows = []
    for model, level in levels:
        kw = {"rho": level} if model == "saltpepper" else {"sigma": level}
        noisy = add_noise(image, NoiseSpec(model, seed=seed, **kw))
        scores = enhance(noisy, "bowlerhat", d_max=d_max, n_directions=n_directions,
                         threads=threads)
        rows.append({"model": model, "level": level, "seed": seed,
                     "auc": roc(scores, truth, n_thresholds).auc,
                     "psnr": psnr(image, noisy, 255.0)})
    return rows
