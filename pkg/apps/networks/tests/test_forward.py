import numpy as np
import pytest

from apps.abstract.exceptions import ShapeError
from apps.latent import sample
from apps.networks import (
    forward_deterministic,
    forward_icap,
    forward_ren,
    forward_sr,
    zero_latent,
)
from apps.networks.layers import ConvBlock
from apps.tensor import Tensor, backward, gradient_check, no_grad


def test_zero_latent_is_the_deterministic_path(toy_config, toy_models, make_image):
    """Test that rendering with a zero latent is the deterministic path"""
    models = toy_models.eval()
    x = make_image(toy_config)
    with no_grad():
        first = forward_sr(models.theta, x, zero_latent(toy_config, 2))
        second = forward_deterministic(models.theta, x)
    np.testing.assert_array_equal(first.data, second.data)
    assert first.shape == x.shape


def test_sr_output_strictly_inside_unit_interval(float64_models, toy_config, make_image):
    """Test that SR outputs lie strictly inside (-1, 1)"""
    x = make_image(toy_config, batch=4)
    z = Tensor(np.random.default_rng(3).normal(size=(4, *toy_config.latent_shape)))
    out = forward_sr(float64_models.theta, x, z)
    assert np.all(np.abs(out.data) < 1.0)


def test_changing_one_latent_element_changes_output(toy_config, toy_models, make_image):
    """Test that changing one latent element changes the render"""
    models = toy_models.eval()
    x = make_image(toy_config, batch=1)
    z = zero_latent(toy_config, 1)
    bumped = z.data.copy()
    bumped[0, 0, 1, 1] = 1.0
    with no_grad():
        base = forward_sr(models.theta, x, z)
        moved = forward_sr(models.theta, x, Tensor(bumped))
    assert np.max(np.abs(base.data - moved.data)) > 0


def test_latent_shape_mismatch_rejected(toy_config, toy_models, make_image):
    """Test that a latent of the wrong shape is a shape error"""
    x = make_image(toy_config)
    with pytest.raises(ShapeError):
        forward_sr(toy_models.theta, x, Tensor(np.zeros((2, 16, 8, 8))))
    with pytest.raises(ShapeError):
        forward_sr(toy_models.theta, x, zero_latent(toy_config, 3))


def test_image_shape_mismatch_rejected(toy_models):
    """Test that an image of the wrong size is a shape error"""
    with pytest.raises(ShapeError):
        forward_icap(toy_models.omega, Tensor(np.zeros((1, 3, 16, 16))))


@pytest.mark.parametrize("network", ["phi", "omega"])
def test_gaussian_heads_shape_range_and_determinism(
    network, toy_config, toy_models, make_image
):
    """Test the shape, range and determinism of the Gaussian heads"""
    models = toy_models.eval()
    forward = forward_ren if network == "phi" else forward_icap
    x = make_image(toy_config)
    with no_grad():
        first = forward(getattr(models, network), x)
        second = forward(getattr(models, network), x)
    assert first.shape == (2, *toy_config.latent_shape)
    for field in ("mu", "log_var"):
        values = getattr(first, field).data
        assert values.min() >= -1.0 and values.max() <= 1.0
        np.testing.assert_array_equal(values, getattr(second, field).data)


def test_every_theta_and_phi_parameter_receives_gradient(
    toy_config, toy_models, make_image, rng
):
    """Test that every theta and phi parameter gets a gradient from the phase-1 loss"""
    x, y = make_image(toy_config), make_image(toy_config)
    with no_grad():
        r = y - forward_deterministic(toy_models.theta, x)
    q = forward_ren(toy_models.phi, r)
    z = sample(q, Tensor(rng.normal(size=q.shape)))
    loss = (y - forward_sr(toy_models.theta, x, z)).abs().sum()
    backward(loss)
    for network in (toy_models.theta, toy_models.phi):
        missing = [n for n, p in network.named_parameters().items() if p.grad is None]
        assert missing == []
    assert all(p.grad is None for p in toy_models.omega.parameters())


def test_conv_block_gradient_check(float64):
    """Test the gradients of a conv block against finite differences"""
    rng = np.random.default_rng(5)
    block = ConvBlock(rng, 2, 3, stride=2)
    x = Tensor(rng.normal(size=(2, 2, 6, 6)))
    projection = rng.normal(size=(2, 3, 3, 3))

    def loss(_):
        return (block(x) * projection).sum()

    for param in (block.conv.weight, block.bn.gamma):
        report = gradient_check(loss, param, step=1e-7)
        assert report.max_rel_error < 1e-3
    report = gradient_check(lambda t: (block(t) * projection).sum(), x, step=1e-7)
    assert report.max_rel_error < 1e-3


@pytest.mark.parametrize(
    "network,name",
    [
        ("theta", "encoder.0.conv.weight"),
        ("theta", "branch.0.deconv.weight"),
        ("theta", "decoder.4.weight"),
        ("phi", "mu_head.layers.0.weight"),
        ("omega", "trunk.0.conv.weight"),
    ],
)
def test_toy_networks_pass_gradient_check(
    network, name, float64_models, toy_config, make_image, rng
):
    """Test toy network parameter gradients against finite differences"""
    x = make_image(toy_config)
    z = Tensor(rng.normal(size=(2, *toy_config.latent_shape)))
    param = getattr(float64_models, network).named_parameters()[name]

    if network == "theta":
        projection = rng.normal(size=x.shape)

        def loss(_):
            return (forward_sr(float64_models.theta, x, z) * projection).sum()

    else:
        forward = forward_ren if network == "phi" else forward_icap
        mu_projection, lv_projection = rng.normal(size=z.shape), rng.normal(size=z.shape)

        def loss(_):
            g = forward(getattr(float64_models, network), x)
            return (g.mu * mu_projection).sum() + (g.log_var * lv_projection).sum()

    report = gradient_check(loss, param, step=1e-7, max_coordinates=12, seed=1)
    assert report.nonfinite == []
    assert report.max_rel_error < 1e-3
