import numpy as np
import pytest

from apps.abstract.exceptions import ConfigurationError, ShapeError
from apps.latent import (
    DiagGaussian,
    interpolate,
    kl_divergence,
    sample,
    sample_n,
    standard_normal_like,
)
from apps.tensor import Tensor, backward, gradient_check


def _const(value, shape=(1, 2, 2, 2)):
    return Tensor(np.full(shape, value), dtype=np.float64)


def test_sample_at_zero_noise_is_the_mean(rng, bounded_gaussian):
    """Test that zero noise samples the mean"""
    g = bounded_gaussian(rng)
    z = sample(g, np.zeros(g.shape))
    np.testing.assert_array_equal(z.data, g.mu.data)


def test_standard_normal_passes_through(rng):
    """Test that a standard normal returns the noise unchanged"""
    g = DiagGaussian(_const(0.0), _const(0.0))
    eps = rng.standard_normal(g.shape)
    np.testing.assert_array_equal(sample(g, eps).data, eps)


def test_sample_is_affine_in_noise(rng, bounded_gaussian):
    """Test that a sample is affine in its noise"""
    g = bounded_gaussian(rng)
    e1, e2 = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    a, b = 0.7, -1.3
    z = sample(g, a * e1 + b * e2)
    expected = g.mu.data + np.exp(g.log_var.data / 2) * (a * e1 + b * e2)
    np.testing.assert_allclose(z.data, expected, rtol=1e-12, atol=1e-12)


def test_sample_noise_shape_mismatch_rejected(rng, bounded_gaussian):
    """Test that noise of the wrong shape is a shape error"""
    g = bounded_gaussian(rng)
    with pytest.raises(ShapeError):
        sample(g, np.zeros((1, 1, 1, 1)))


def test_sample_carries_gradient_to_mu_and_log_var(rng, bounded_gaussian):
    """Test that sampling passes gradients to mu and log_var"""
    g = bounded_gaussian(rng, requires_grad=True)
    eps = rng.standard_normal(g.shape)
    backward(sample(g, eps).sum())
    np.testing.assert_array_equal(g.mu.grad, np.ones(g.shape))
    np.testing.assert_allclose(g.log_var.grad, 0.5 * np.exp(g.log_var.data / 2) * eps)


def test_empirical_mean_approaches_mu(rng, bounded_gaussian):
    """Test that the mean of many samples approaches mu"""
    g = bounded_gaussian(rng, shape=(1, 2, 2, 2))
    n = 100_000
    eps = rng.standard_normal((n,) + g.shape[1:])
    draws = g.mu.data + np.exp(g.log_var.data / 2) * eps
    sigma = np.exp(g.log_var.data / 2)[0]
    assert np.all(np.abs(draws.mean(axis=0) - g.mu.data[0]) < 3 * sigma / np.sqrt(n))


def test_sample_n_prefix_is_reproducible(rng, bounded_gaussian):
    """Test that fewer draws from the same generator are a prefix of more"""
    g = bounded_gaussian(rng)
    long = sample_n(g, np.random.default_rng(3), 10)
    short = sample_n(g, np.random.default_rng(3), 4)
    for a, b in zip(short, long[:4]):
        np.testing.assert_array_equal(a.data, b.data)


def test_standard_normal_like_matches_dtype(rng, bounded_gaussian):
    """Test that drawn noise takes the dtype of the distribution"""
    g = bounded_gaussian(rng, dtype=np.float32)
    assert standard_normal_like(g, rng).dtype == np.float32


def test_kl_of_distribution_with_itself_is_exactly_zero(rng, bounded_gaussian):
    """Test that the KL of a distribution with itself is exactly zero"""
    for _ in range(20):
        g = bounded_gaussian(rng)
        assert kl_divergence(g, g).item() == 0.0


def test_kl_unit_mean_shift_is_half_per_element():
    """Test that a unit mean shift costs one half per element"""
    q = DiagGaussian(_const(0.0), _const(0.0))
    g = DiagGaussian(_const(1.0), _const(0.0))
    assert kl_divergence(q, g).item() == pytest.approx(0.5 * 8)
    assert kl_divergence(q, g, reduction="mean").item() == pytest.approx(0.5)


def test_kl_is_non_negative_and_asymmetric(rng, bounded_gaussian):
    """Test that KL is never negative and depends on argument order"""
    asymmetric = 0
    for _ in range(1000):
        q, g = bounded_gaussian(rng), bounded_gaussian(rng)
        forward = kl_divergence(q, g).item()
        assert forward >= 0.0
        if abs(forward - kl_divergence(g, q).item()) > 1e-9:
            asymmetric += 1
    assert asymmetric > 900


@pytest.mark.parametrize("seed", range(20))
def test_kl_agrees_with_monte_carlo_estimate(seed, bounded_gaussian):
    """Test that the closed-form KL matches a Monte-Carlo estimate"""
    rng = np.random.default_rng(seed)
    q = bounded_gaussian(rng, shape=(1, 4, 2, 2))
    g = bounded_gaussian(rng, shape=(1, 4, 2, 2))
    mu_q, lv_q = q.mu.data[0], q.log_var.data[0]
    mu_g, lv_g = g.mu.data[0], g.log_var.data[0]

    n = 100_000
    z = mu_q + np.exp(lv_q / 2) * rng.standard_normal((n,) + mu_q.shape)

    def log_density(x, mu, lv):
        return -0.5 * (np.log(2 * np.pi) + lv + (x - mu) ** 2 / np.exp(lv))

    estimate = np.mean(
        np.sum(log_density(z, mu_q, lv_q) - log_density(z, mu_g, lv_g), axis=(1, 2, 3))
    )
    closed = kl_divergence(q, g).item()
    assert abs(estimate - closed) / closed < 1e-2


def test_kl_shape_mismatch_rejected(rng, bounded_gaussian):
    """Test that KL between different shapes is a shape error"""
    with pytest.raises(ShapeError):
        kl_divergence(bounded_gaussian(rng), bounded_gaussian(rng, shape=(1, 4, 1, 1)))


@pytest.mark.parametrize("seed", range(5))
def test_kl_gradient_matches_finite_differences(seed, bounded_gaussian):
    """Test the KL gradient against finite differences"""
    rng = np.random.default_rng(seed)
    q = bounded_gaussian(rng)
    g = bounded_gaussian(rng).detach()

    report = gradient_check(
        lambda mu: kl_divergence(DiagGaussian(mu, q.log_var), g), q.mu.data.copy()
    )
    assert report.max_rel_error < 1e-3
    report = gradient_check(
        lambda lv: kl_divergence(DiagGaussian(q.mu, lv), g), q.log_var.data.copy()
    )
    assert report.max_rel_error < 1e-3


def test_interpolate_endpoints_and_midpoint(rng):
    """Test that interpolation hits both endpoints and the midpoint"""
    start = Tensor(rng.normal(size=(1, 2, 2, 2)), dtype=np.float64)
    end = Tensor(rng.normal(size=(1, 2, 2, 2)), dtype=np.float64)
    np.testing.assert_array_equal(interpolate(start, end, 0.0).data, start.data)
    np.testing.assert_array_equal(interpolate(start, end, 1.0).data, end.data)
    mid = interpolate(_const(0.0), _const(2.0), 0.5)
    np.testing.assert_array_equal(mid.data, np.ones((1, 2, 2, 2)))


def test_interpolate_is_linear_in_alpha(rng):
    """Test that interpolation is linear in alpha"""
    start = Tensor(rng.normal(size=(1, 2, 2, 2)), dtype=np.float64)
    end = Tensor(rng.normal(size=(1, 2, 2, 2)), dtype=np.float64)
    a1, a2 = 0.2, 0.9
    total = interpolate(start, end, a1).data + interpolate(start, end, a2).data
    np.testing.assert_allclose(
        total, 2 * interpolate(start, end, (a1 + a2) / 2).data, rtol=1e-12, atol=1e-12
    )


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_interpolate_rejects_alpha_outside_unit_interval(alpha):
    """Test that alpha outside [0, 1] is a configuration error"""
    with pytest.raises(ConfigurationError):
        interpolate(_const(0.0), _const(1.0), alpha)
