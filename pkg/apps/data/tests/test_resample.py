import numpy as np
import pytest
from scipy import ndimage

from apps.abstract.exceptions import ConfigurationError
from apps.data import bicubic_resample, cubic_kernel, degrade, generate_synthetic
from apps.data.resample import resample_matrix


def test_kernel_weights_at_half_pixel_offset():
    """Test the cubic kernel weights at half-pixel offsets"""
    weights = cubic_kernel(np.array([-1.5, -0.5, 0.5, 1.5]))
    np.testing.assert_allclose(weights, [-0.0625, 0.5625, 0.5625, -0.0625], atol=1e-12)


def test_kernel_vanishes_at_nonzero_integers():
    """Test that the kernel is one at zero and zero at the other integers"""
    np.testing.assert_array_equal(cubic_kernel(np.array([0, 1, 2, 2.5, -3])), [1, 0, 0, 0, 0])


@pytest.mark.parametrize("out_size", [1, 5, 7, 16, 40])
@pytest.mark.parametrize("antialias", [False, True])
def test_constant_image_stays_constant(out_size, antialias):
    """Test that resampling a constant image keeps it constant"""
    img = np.full((3, 16, 16), 0.37, dtype=np.float32)
    out = bicubic_resample(img, out_size, antialias=antialias)
    assert out.shape == (3, out_size, out_size)
    np.testing.assert_allclose(out, 0.37, atol=1e-6)


@pytest.mark.parametrize("sizes", [(16, 4), (16, 2), (4, 16), (7, 13), (32, 32)])
def test_weights_form_a_partition_of_unity(sizes):
    """Test that every row of the resampling matrix sums to one"""
    matrix = resample_matrix(*sizes)
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(resample_matrix(*sizes, True).sum(axis=1), 1.0, atol=1e-6)


def test_halving_uses_half_pixel_taps_and_clamps_edges():
    """Test that halving samples at half-pixel taps and clamps at the edges"""
    matrix = resample_matrix(8, 4)
    np.testing.assert_allclose(matrix[1, 1:5], [-0.0625, 0.5625, 0.5625, -0.0625])
    assert matrix[0, 0] == pytest.approx(0.5)


def test_same_size_is_identity(rng):
    """Test that resampling to the same size returns the image unchanged"""
    img = rng.uniform(-1, 1, size=(3, 9, 9)).astype(np.float32)
    np.testing.assert_array_equal(bicubic_resample(img, 9), img)


def test_degrade_scale_one_is_identity(rng):
    """Test that degrading by a factor of one is the identity"""
    hr = rng.uniform(-1, 1, size=(3, 16, 16)).astype(np.float32)
    np.testing.assert_array_equal(degrade(hr, 1), hr)


def test_degrade_rejects_indivisible_sizes():
    """Test that a size not divisible by the scale is a configuration error"""
    with pytest.raises(ConfigurationError):
        degrade(np.zeros((3, 30, 30)), 4)


@pytest.mark.parametrize("scale", [4, 8, 16])
def test_degrade_keeps_shape_and_is_deterministic(scale):
    """Test that degrading keeps the HR shape and repeats exactly"""
    hr, _ = generate_synthetic(seed=0, count=1, image_size=64)[0]
    first, second = degrade(hr, scale), degrade(hr, scale)
    assert first.shape == hr.shape
    np.testing.assert_array_equal(first, second)


def test_degrade_is_shift_covariant_away_from_borders(rng):
    """Test that shifting the input by the scale shifts the output away from the borders"""
    big = rng.uniform(-1, 1, size=(3, 34, 32))
    shift, border = 2, 8
    a = degrade(big[:, :32, :], 2)
    b = degrade(big[:, shift : shift + 32, :], 2)
    np.testing.assert_allclose(
        a[:, border + shift : 32 - border + shift, border:-border],
        b[:, border : 32 - border, border:-border],
        atol=1e-9,
    )


def _high_pass_energy(img):
    smooth = ndimage.uniform_filter(img, size=(1, 3, 3), mode="nearest")
    return float(np.mean((img - smooth) ** 2))


def test_degrade_attenuates_energy_above_lr_nyquist():
    """Test that degrading removes most of the detail the LR grid cannot hold"""
    ratios = []
    for hr, _ in generate_synthetic(seed=5, count=8, image_size=64):
        ratios.append(_high_pass_energy(degrade(hr, 8)) / _high_pass_energy(hr))
    assert np.mean(ratios) < 0.25
    assert max(ratios) < 0.25
