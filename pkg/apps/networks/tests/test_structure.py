import numpy as np
import pytest

from apps.abstract.exceptions import ConfigurationError
from apps.networks import (
    ArchConfig,
    build_models,
    forward_icap,
    forward_ren,
    forward_sr,
    trace_shapes,
    zero_latent,
)
from apps.tensor import Tensor, no_grad

# label -> output size per sample at the full-scale configuration
SR_ROWS = {
    "ConvBlock1": (64, 64, 64),
    "ResBlock1": (64, 64, 64),
    "Conv1": (64, 64, 64),
    "BatchNorm1": (64, 64, 64),
    "ConvBlock2": (64, 64, 64),
    "DeconvBlock1": (64, 128, 128),
    "ResBlock2": (64, 128, 128),
    "ConvBlock3": (3, 128, 128),
    "Tanh1": (3, 128, 128),
    "DeconvBlock2": (64, 16, 16),
    "ResBlock3": (64, 16, 16),
    "DeconvBlock3": (64, 32, 32),
    "ResBlock4": (64, 32, 32),
    "DeconvBlock4": (64, 64, 64),
    "ResBlock5": (64, 64, 64),
}
ICAP_ROWS = {
    "ConvBlock4": (64, 64, 64),
    "ResBlock6": (64, 64, 64),
    "ConvBlock5": (64, 32, 32),
    "ResBlock7": (64, 32, 32),
    "ConvBlock6": (64, 16, 16),
    "ResBlock8": (64, 16, 16),
    "ConvBlock7": (64, 8, 8),
    "ResBlock9": (64, 8, 8),
    "Conv2": (64, 8, 8),
    "Conv3": (32, 8, 8),
    "BatchNorm2": (32, 8, 8),
    "LeakyReLU1": (32, 8, 8),
    "Conv4": (64, 8, 8),
    "BatchNorm3": (64, 8, 8),
    "Tanh2": (64, 8, 8),
}
REN_ROWS = {
    "ConvBlock8": (64, 8, 8),
    "Conv5": (64, 8, 8),
    "BatchNorm4": (64, 8, 8),
    "Conv6": (32, 8, 8),
    "BatchNorm5": (32, 8, 8),
    "LeakyReLU2": (32, 8, 8),
    "Conv7": (64, 8, 8),
    "BatchNorm6": (64, 8, 8),
    "Tanh3": (64, 8, 8),
}


def _traced(run):
    with no_grad(), trace_shapes() as trace:
        run()
    shapes = {}
    for label, shape in trace:
        # mu and log_var heads share their labels and must agree
        assert shapes.setdefault(label, shape) == shape
    return shapes


def test_full_scale_layers_match_table_output_sizes():
    """Test that every full-scale layer has its documented output size"""
    config = ArchConfig.full_scale()
    models = build_models(config, seed=0).eval()
    x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(1, *config.image_shape)))

    sr = _traced(lambda: forward_sr(models.theta, x, zero_latent(config, 1)))
    icap = _traced(lambda: forward_icap(models.omega, x))
    ren = _traced(lambda: forward_ren(models.phi, x))

    assert sr == SR_ROWS
    assert icap == ICAP_ROWS
    assert ren == REN_ROWS


def _conv(cin, cout, k=3):
    return cout * cin * k * k + cout


def _bn(c):
    return 2 * c


def _res(c):
    return 2 * (_conv(c, c) + _bn(c))


def _head(c, hidden):
    return _conv(c, hidden) + _bn(hidden) + _conv(hidden, c) + _bn(c)


def _layer_arithmetic(config):
    b, c, lc = config.base_channels, config.color_channels, config.latent_channels
    h = config.head_channels
    deconv = _conv(b, b, 4) + _bn(b)
    theta = (
        _conv(c, b) + _bn(b)
        + config.enc_res_blocks * _res(b)
        + _conv(b, b)
        + _bn(b)
        + _conv(b, b) + _bn(b)
        + deconv
        + config.dec_res_blocks * _res(b)
        + _conv(b, c)
        + (_conv(lc, b, 4) + _bn(b) + _res(b))
        + (config.branch_depth - 1) * (deconv + _res(b))
    )
    down = _conv(c, b) + _bn(b) + (config.down_depth - 1) * (_conv(b, b) + _bn(b))
    omega = down + config.down_depth * _res(b) + _conv(b, lc) + 2 * _head(lc, h)
    phi = down + _conv(b, lc) + _bn(lc) + 2 * _head(lc, h)
    return {"theta": theta, "phi": phi, "omega": omega}


def test_toy_parameter_counts_match_layer_arithmetic(toy_config, toy_models):
    """Test toy parameter counts against per-layer arithmetic"""
    expected = _layer_arithmetic(toy_config)
    assert expected == {"theta": 41571, "phi": 12288, "omega": 26368}
    assert toy_models.num_parameters() == expected


def test_full_scale_parameter_counts_match_layer_arithmetic():
    """Test full-scale parameter counts against per-layer arithmetic"""
    config = ArchConfig.full_scale()
    assert build_models(config, seed=0).num_parameters() == _layer_arithmetic(config)


def test_same_seed_gives_identical_parameters(toy_config):
    """Test that the same seed gives identical parameters"""
    first = build_models(toy_config, seed=11).state()
    second = build_models(toy_config, seed=11).state()
    assert first.keys() == second.keys()
    for name in first:
        np.testing.assert_array_equal(first[name], second[name])


def test_different_seed_gives_different_weights(toy_config):
    """Test that another seed gives other weights"""
    first = build_models(toy_config, seed=1).state()
    second = build_models(toy_config, seed=2).state()
    name = "theta.encoder.0.conv.weight"
    assert not np.array_equal(first[name], second[name])


def test_parameter_names_are_unique_and_finite(toy_models):
    """Test that parameter names are unique and values finite"""
    for network in toy_models.networks().values():
        named = network.named_parameters()
        assert len(named) == len(network.parameters())
        assert all(np.all(np.isfinite(p.data)) for p in named.values())


def test_biases_start_at_zero_and_batch_norm_at_identity(toy_models):
    """Test that biases start at zero and batch norm at the identity"""
    params = toy_models.theta.named_parameters()
    assert not params["encoder.0.conv.bias"].data.any()
    np.testing.assert_array_equal(params["encoder.0.bn.gamma"].data, 1.0)
    np.testing.assert_array_equal(params["encoder.0.bn.beta"].data, 0.0)


@pytest.mark.parametrize(
    "overrides",
    [
        {"image_size": 48, "latent_size": 8},
        {"image_size": 32, "latent_size": 32},
        {"image_size": 32, "latent_size": 16, "latent_channels": 8},
        {"scale_factor": 3},
        {"base_channels": 0},
    ],
)
def test_invalid_configs_are_rejected(overrides):
    """Test that inconsistent architecture configs are configuration errors"""
    with pytest.raises(ConfigurationError):
        ArchConfig.toy(**overrides)


def test_branch_depth_follows_latent_size():
    """Test that the latent branch depth follows the latent size"""
    assert ArchConfig.full_scale().branch_depth == 3
    assert ArchConfig.toy().branch_depth == 2
    assert ArchConfig.toy(latent_size=16, latent_channels=16).branch_depth == 0
