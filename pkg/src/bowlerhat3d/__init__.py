"""Multiscale 3D bowler-hat vessel enhancement with Hessian baselines."""

__version__ = "0.1.0"

from .bowlerhat import BowlerHatParams, ScaleBank, bowler_hat, line_bank, sphere_bank
from .evaluation import RocCurve, Profile, auc_table, extract_profile, fwhm, psnr, roc
from .hessian import (VesselnessParams, VolumeRatioParams, eig_sym3, gaussian_hessian,
                      neuriteness, neuriteness_multiscale, vesselness, volume_ratio)
from .morphology import (DirectionSet, StructuringElement, bottom_hat, closing, dilate, erode,
                         make_direction_set, make_line_se, make_sphere_se, opening, top_hat)
from .phantom import NoiseSpec, PhantomSpec, add_illumination_ramp, add_noise, generate_phantom
from .volume import Volume, load_volume, normalize, save_volume
