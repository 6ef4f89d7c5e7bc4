import numpy as np
import pytest

from apps.abstract.exceptions import NumericalError, ShapeError
from apps.abstract.choices import ActivationKind
from apps.tensor import (
    Tape,
    Tensor,
    activation,
    backward,
    conv2d,
    gradient_check,
    no_grad,
    tanh,
)
from apps.tensor import functional as F


def test_tanh_at_zero():
    """Test the value and gradient of tanh at zero"""
    x = Tensor(np.zeros(1), requires_grad=True)
    y = tanh(x).sum()
    assert y.item() == 0.0
    backward(y)
    assert x.grad[0] == 1.0


def test_relu_and_leaky_relu_values():
    """Test relu and leaky relu on a negative and a positive input"""
    x = Tensor(np.array([-2.0, 3.0]))
    np.testing.assert_array_equal(activation(x, ActivationKind.RELU).data, [0.0, 3.0])
    leaky = activation(x, "leaky_relu", slope=0.2)
    np.testing.assert_allclose(leaky.data, [-0.4, 3.0], rtol=1e-6)


def test_tanh_output_in_open_interval(rng):
    """Test that tanh stays within [-1, 1] for large inputs"""
    out = tanh(Tensor(rng.normal(size=100) * 50.0, dtype=np.float64))
    assert np.all(np.abs(out.data) <= 1.0)
    out = tanh(Tensor(rng.normal(size=100), dtype=np.float64))
    assert np.all(np.abs(out.data) < 1.0)


def test_sum_of_squares_gradient():
    """Test the gradient of a sum of squares"""
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    backward((x**2).sum())
    np.testing.assert_array_equal(x.grad, [2.0, -4.0, 6.0])


def test_non_scalar_root_rejected():
    """Test that backward from a non-scalar is a shape error"""
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(x * 2.0)


def test_tape_is_replayed_once_per_operation_in_reverse_order():
    """Test that each recorded operation runs backward once, last first"""
    x = Tensor(np.ones(3), requires_grad=True)
    a = x * 2.0
    b = a + x
    root = (b * b).sum()
    tape = Tape.from_root(root)
    sequence = [node.seq for node in tape]
    assert sequence == sorted(sequence)
    assert [node.function.__name__ for node in tape] == ["Mul", "Add", "Mul", "Sum"]
    assert tape.replay_backward(root) == len(tape)
    # d/dx sum((3x)^2) = 18x
    np.testing.assert_array_equal(x.grad, np.full(3, 18.0))


def test_leaf_used_twice_accumulates_gradient():
    """Test that a leaf used twice accumulates both gradients"""
    x = Tensor(np.array([2.0]), requires_grad=True)
    backward((x * x).sum())
    assert x.grad[0] == 4.0


def test_broadcast_gradient_reduces_to_operand_shape(rng):
    """Test that a broadcast operand gets a gradient of its own shape"""
    x = Tensor(rng.normal(size=(2, 3, 4, 4)), requires_grad=True)
    bias = Tensor(np.zeros((1, 3, 1, 1)), requires_grad=True)
    backward((x + bias).sum())
    assert bias.grad.shape == (1, 3, 1, 1)
    np.testing.assert_array_equal(bias.grad.ravel(), np.full(3, 32.0))


def test_no_grad_suppresses_recording():
    """Test that nothing is recorded under no_grad"""
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = (x * 3.0).sum()
    assert y.tape_id is None
    assert not y.requires_grad


def test_detach_blocks_gradient():
    """Test that no gradient flows through a detached tensor"""
    x = Tensor(np.array([1.5]), requires_grad=True)
    backward((x * x.detach()).sum())
    assert x.grad[0] == 1.5


def test_non_finite_output_on_finite_input_is_flagged():
    """Test that an overflow on finite input is a numerical error"""
    x = Tensor(np.array([1000.0], dtype=np.float32))
    with pytest.raises(NumericalError):
        F.exp(x)


def test_gradient_check_sum_of_squares_at_64_bit():
    """Test gradient_check on a sum of squares at 64 bit"""
    report = gradient_check(lambda t: (t**2).sum(), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(report.analytic, [2.0, 4.0, 6.0])
    assert report.max_rel_error < 1e-6
    assert report.passed


def test_gradient_check_marks_non_finite_coordinates():
    """Test that gradient_check lists coordinates whose differences overflow"""
    # exp overflows just above 709.78
    report = gradient_check(lambda t: F.exp(t).sum(), np.array([0.0, 709.5]), step=0.5)
    assert report.nonfinite == [(1,)]
    assert not report.passed


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("kind", ["relu", "leaky_relu", "tanh"])
def test_activation_gradients_match_finite_differences(seed, kind):
    """Test activation gradients against finite differences"""
    rng = np.random.default_rng(seed)
    point = rng.normal(size=(3, 4))
    # keep clear of the relu kink
    point[np.abs(point) < 1e-2] = 0.5
    report = gradient_check(lambda t: (activation(t, kind) ** 2).sum(), point)
    assert report.passed, report.max_rel_error


@pytest.mark.parametrize("seed", range(10))
def test_elementwise_gradients_match_finite_differences(seed):
    """Test elementwise operation gradients against finite differences"""
    rng = np.random.default_rng(seed)
    other = Tensor(rng.normal(size=(3, 4)), dtype=np.float64)

    def f(t):
        return ((t - other) * t.exp() + (t * 0.5).abs() - t / 3.0).mean()

    point = rng.normal(size=(3, 4))
    point[np.abs(point) < 1e-2] = 0.3
    report = gradient_check(f, point)
    assert report.passed, report.max_rel_error


def test_forward_backward_is_bitwise_deterministic(rng):
    """Test that repeated forward and backward passes agree bit for bit"""
    x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
    w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)

    def run():
        wt = Tensor(w, requires_grad=True)
        out = tanh(conv2d(Tensor(x), wt, stride=2, padding=1)).mean()
        backward(out)
        return out.data.copy(), wt.grad.copy()

    (out_a, grad_a), (out_b, grad_b) = run(), run()
    assert out_a.tobytes() == out_b.tobytes()
    assert grad_a.tobytes() == grad_b.tobytes()
