import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcdm.baselines import (bicubic_demosaic, bilinear_demosaic, cubic_kernel, interior_mask,
                            interp_matrix, interpolate_plane)
from pcdm.mosaic import mosaic
from pcdm.pattern import ImageStack, MosaicImage, default_pattern, sample_positions

METHODS = (bilinear_demosaic, bicubic_demosaic)


def _poly_stack(h, w, f):
    yy, xx = np.mgrid[:h, :w].astype(float)
    plane = f(yy, xx)
    return ImageStack(np.repeat(plane[:, :, None], 12, axis=2)), plane


def test_kernels_are_interpolating():
    x = np.array([0.0, 1.0, 2.0, -1.0, 0.5])
    assert np.allclose(cubic_kernel(x)[:4], [1, 0, 0, 0])
    # partition of unity at any phase
    for t in np.linspace(0, 1, 7):
        assert np.isclose(cubic_kernel(np.array([t + 1, t, t - 1, t - 2])).sum(), 1.0)


def test_interp_matrix_rows_sum_to_one():
    for method in ("bilinear", "bicubic"):
        m = interp_matrix(32, 8, 1, method)
        assert np.allclose(m.sum(axis=1), 1.0)


@pytest.mark.parametrize("demosaic", METHODS)
def test_constant_mosaic_is_reproduced_exactly(demosaic):
    m = MosaicImage(np.full((16, 20), 0.37))
    assert np.array_equal(demosaic(m).data, np.full((16, 20, 12), 0.37))


@pytest.mark.parametrize("demosaic", METHODS)
def test_samples_are_kept(demosaic, rng):
    m = MosaicImage(rng.random((16, 16)))
    out = demosaic(m).data
    got = np.take_along_axis(out, m.index_map()[:, :, None], axis=2)[:, :, 0]
    assert np.array_equal(got, m.data)


@pytest.mark.parametrize("demosaic,method", [(bilinear_demosaic, "bilinear"),
                                             (bicubic_demosaic, "bicubic")])
def test_linear_ramp_exact_in_interior(demosaic, method):
    h, w = 32, 40
    stack, plane = _poly_stack(h, w, lambda y, x: 0.1 + 0.01 * y + 0.015 * x)
    out = demosaic(mosaic(stack)).data
    for ch in range(12):
        inner = interior_mask(h, w, sample_positions(default_pattern(), ch), method)
        assert inner.any()
        assert np.max(np.abs(out[:, :, ch] - plane)[inner]) < 1e-6


def test_bicubic_reproduces_quadratics_in_interior():
    # Catmull-Rom reproduces polynomials up to degree 2 exactly
    h, w = 40, 40
    f = lambda y, x: 0.2 + 2e-4 * (y - 20) ** 2 + 1e-4 * x * y
    yy, xx = np.mgrid[:h, :w].astype(float)
    plane = f(yy, xx)
    offs = [(1, 2)]
    out = interpolate_plane(plane, offs, "bicubic")
    inner = interior_mask(h, w, offs, "bicubic")
    assert np.max(np.abs(out - plane)[inner]) < 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_output_in_unit_range(seed):
    m = MosaicImage(np.random.default_rng(seed).random((12, 12)))
    for demosaic in METHODS:
        d = demosaic(m).data
        assert d.min() >= 0.0 and d.max() <= 1.0
