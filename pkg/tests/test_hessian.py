import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bowlerhat3d.errors import DegenerateResponseWarning, InvalidParameterError
from bowlerhat3d.hessian import (VesselnessParams, VolumeRatioParams, eig_sym3, eigh_sym3,
                                 gaussian_hessian, gaussian_kernels, jacobi_sym3, neuriteness,
                                 neuriteness_from_eigenvalues, neuriteness_multiscale,
                                 regularized_lambda, vesselness, vesselness_response,
                                 volume_ratio, volume_ratio_response)
from bowlerhat3d.pipeline import tube_phantom

from oracles import fd_hessian, frangi_formula, smoothed_blob


def blob(n=40, s0=5.0):
    x = np.arange(n) - n // 2
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return np.exp(-(X ** 2 + Y ** 2 + Z ** 2) / (2 * s0 ** 2))


def sym_from(m):
    return m[..., 0, 0], m[..., 1, 1], m[..., 2, 2], m[..., 0, 1], m[..., 0, 2], m[..., 1, 2]


@pytest.mark.parametrize("sigma", [0.5, 1.0, 1.5, 3.0])
def test_kernels(sigma):
    g0, g1, g2 = gaussian_kernels(sigma)
    r = math.ceil(4 * sigma)
    assert len(g0) == len(g1) == len(g2) == 2 * r + 1
    assert g0.sum() == pytest.approx(1, abs=1e-15)
    assert abs(g2.sum()) < 1e-15
    assert np.allclose(g1, -g1[::-1]) and np.allclose(g2, g2[::-1])


def test_kernels_reject_sigma():
    with pytest.raises(InvalidParameterError):
        gaussian_kernels(0)


def test_constant_components_vanish():
    hf = gaussian_hessian(np.full((20, 20, 20), 37.0), 2.0)
    for c in hf.components():
        assert np.abs(c).max() < 1e-6


def test_diagonal_and_identity():
    vals = eig_sym3(1.0, -2.0, 3.0, 0.0, 0.0, 0.0)
    assert [float(v) for v in vals] == [1.0, -2.0, 3.0]
    assert [float(v) for v in eig_sym3(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)] == [1.0, 1.0, 1.0]


def test_matches_lapack():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5000, 3, 3))
    m = a + a.transpose(0, 2, 1)
    got = np.stack(eig_sym3(*sym_from(m)), axis=-1)
    ref = np.linalg.eigvalsh(m)
    ref = np.take_along_axis(ref, np.argsort(np.abs(ref), axis=-1, kind="stable"), axis=-1)
    assert np.abs(got - ref).max() < 1e-10


def test_degenerate_spectra():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    for spec in ([2, 2, 2], [1, 1, -3], [0, 0, 5], [4, -4, 4]):
        m = q @ np.diag(spec) @ q.T
        got = sorted(float(v) for v in eig_sym3(*sym_from(m)))
        assert np.allclose(got, sorted(spec), atol=1e-10)


def test_eigenvectors_residual():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(500, 3, 3))
    m = a + a.transpose(0, 2, 1)
    vals, vecs = eigh_sym3(*sym_from(m))
    res = m @ vecs - vecs * vals[:, None, :]
    assert np.abs(res).max() < 1e-10
    assert np.allclose(vecs.transpose(0, 2, 1) @ vecs, np.eye(3), atol=1e-12)


def test_jacobi_independent_of_batch():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    easy = q @ np.diag([1.0, 1.0, 2.0]) @ q.T
    hard = rng.normal(size=(3, 3))
    hard = hard + hard.T
    alone = jacobi_sym3(easy[None])[0]
    mixed = jacobi_sym3(np.stack([easy, hard]))[0][:1]
    assert np.array_equal(alone, mixed)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_eig_threads_identical(threads):
    a = np.random.default_rng(4).normal(size=(6, 7, 8, 3, 3))
    m = a + np.swapaxes(a, -1, -2)
    one = eig_sym3(*sym_from(m))
    many = eig_sym3(*sym_from(m), threads=threads)
    assert all(np.array_equal(x, y) for x, y in zip(one, many))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
def test_trace_and_det_preserved(c):
    h11, h22, h33, h12, h13, h23 = c
    m = np.array([[h11, h12, h13], [h12, h22, h23], [h13, h23, h33]])
    l = [float(v) for v in eig_sym3(*c)]
    fro = float(np.linalg.norm(m))
    assert abs(sum(l) - np.trace(m)) <= 1e-9 * fro + 1e-300
    assert abs(l[0] * l[1] * l[2] - np.linalg.det(m)) <= 1e-6 * fro ** 3 + 1e-300
    assert abs(l[0]) <= abs(l[1]) <= abs(l[2])


def test_blob_center_analytic():
    s0, s = 5.0, 2.0
    hf = gaussian_hessian(blob(48, s0), s)
    c = 24
    expected = -((s0 ** 2 / (s0 ** 2 + s ** 2)) ** 1.5) / (s0 ** 2 + s ** 2)
    for h in (hf.h11, hf.h22, hf.h33):
        assert h[c, c, c] == pytest.approx(expected, rel=0.02)
    for h in (hf.h12, hf.h13, hf.h23):
        assert abs(h[c, c, c]) < 1e-12


@pytest.mark.parametrize("s0, s", [(3.0, 1.0), (4.0, 1.5)])
def test_finite_difference_oracle(s0, s):
    # blob must be smooth on the scale of s: the 4 s kernel cut-off alone
    # costs roughly 1e-2 * s^2 / (s0^2 + s^2) relative error
    hf = gaussian_hessian(blob(48, s0), s)
    fd = fd_hessian(smoothed_blob(48, s0, s))
    inner = (slice(12, 36),) * 3
    pairs = {(0, 0): hf.h11, (1, 1): hf.h22, (2, 2): hf.h33,
             (0, 1): hf.h12, (0, 2): hf.h13, (1, 2): hf.h23}
    for key, h in pairs.items():
        ref = fd[key][inner]
        assert np.abs(h[inner] - ref).max() <= 1e-3 * np.abs(ref).max()


def test_vesselness_tube_example():
    h = 100.0
    v = float(vesselness_response(0.0, -h, -h, 0.5, 0.5, 1.0))
    assert v == pytest.approx(1 - math.exp(-2), rel=1e-9)
    assert v == pytest.approx(0.8647, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
       st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.1, 50))
def test_vesselness_matches_formula(vals, alpha, beta, c):
    l1, l2, l3 = sorted(vals, key=abs)
    got = float(vesselness_response(l1, l2, l3, alpha, beta, c))
    assert got == pytest.approx(frangi_formula(l1, l2, l3, alpha, beta, c), rel=1e-9, abs=1e-12)


def test_tube_beats_blob():
    h = 10.0
    mag = math.sqrt(2) * h
    tube = float(vesselness_response(0.0, -h, -h, 0.5, 0.5, 5.0))
    b = mag / math.sqrt(3)
    blob_ = float(vesselness_response(-b, -b, -b, 0.5, 0.5, 5.0))
    assert tube >= 5 * blob_


def test_vesselness_constant_zero():
    assert not vesselness(np.full((16, 16, 16), 5.0)).any()


def test_vesselness_bright_tube():
    img, _ = tube_phantom(n=32, diameter=5, length=20)
    v = vesselness(img)
    assert v[16, 16, 16] > 0.5
    assert v[4, 4, 4] == 0


def test_vesselness_params():
    with pytest.raises(InvalidParameterError):
        VesselnessParams(alpha=0)
    with pytest.raises(InvalidParameterError):
        VesselnessParams(scales=(2.0, 1.0))
    with pytest.raises(InvalidParameterError):
        VesselnessParams(c=-1)


def test_neuriteness_constant_warns():
    with pytest.warns(DegenerateResponseWarning):
        out = neuriteness(np.full((12, 12, 12), 3.0), 1.5)
    assert not out.any()
    with pytest.warns(DegenerateResponseWarning):
        assert not neuriteness_multiscale(np.zeros((10, 10, 10)), (1.0, 2.0)).any()


def test_neuriteness_alpha_zero_is_plain():
    rng = np.random.default_rng(5)
    l = np.sort(rng.normal(size=(3, 50)), axis=0)
    l1, l2, l3 = (np.take_along_axis(l, np.argsort(np.abs(l), axis=0), axis=0))
    out = neuriteness_from_eigenvalues(l1, l2, l3, alpha=0.0)
    expected = np.where(l3 < 0, l3 / l3.min(), 0.0)
    assert np.allclose(out, expected)


def test_neuriteness_mixing():
    out = neuriteness_from_eigenvalues(np.array([0.0, 0.0]), np.array([-1.0, 0.0]),
                                       np.array([-2.0, 1.0]), alpha=-1 / 3)
    # first voxel: mixed = (1, -1/3, -5/3) -> -5/3 is dominant and the global minimum
    assert out[0] == pytest.approx(1.0)
    # second: mixed = (-1/3, -1/3, 1) -> positive dominant scores 0
    assert out[1] == 0


def test_neuriteness_tube():
    img, _ = tube_phantom(n=32, diameter=5, length=20)
    n = neuriteness(img, 2.0)
    assert n.max() == pytest.approx(1.0)
    assert n[16, 16, 16] > 0.5 and (n >= 0).all()


@pytest.mark.parametrize("l2, lrho, expected", [
    (-1.0, 2.0, 0.0), (1.0, 0.0, 0.0), (1.5, 3.0, 1.0), (2.0, 3.0, 1.0), (1.0, 3.0, 0.84375)])
def test_volume_ratio_cases(l2, lrho, expected):
    assert float(volume_ratio_response(l2, lrho)) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_volume_ratio_range(l2, lrho):
    assert 0.0 <= float(volume_ratio_response(l2, lrho)) <= 1.0 + 1e-12


def test_regularized_lambda():
    l3 = np.array([4.0, 1.0, 3.0, -1.0])
    assert regularized_lambda(l3, 0.5).tolist() == [4.0, 2.0, 3.0, 0.0]


def test_volume_ratio_tube_and_constant():
    img, _ = tube_phantom(n=32, diameter=5, length=20)
    out = volume_ratio(img)
    assert out[16, 16, 16] == pytest.approx(1.0) and out[3, 3, 3] == 0
    assert not volume_ratio(np.full((12, 12, 12), 2.0)).any()
    with pytest.raises(InvalidParameterError):
        VolumeRatioParams(tau=0)


@pytest.mark.parametrize("threads", [2, 8])
def test_enhancers_thread_invariant(threads):
    img = np.random.default_rng(6).normal(size=(14, 13, 12))
    p = VesselnessParams(scales=(1.0, 2.0))
    assert np.array_equal(vesselness(img, p, threads), vesselness(img, p, 1))
    q = VolumeRatioParams(scales=(1.0, 2.0))
    assert np.array_equal(volume_ratio(img, q, threads), volume_ratio(img, q, 1))
