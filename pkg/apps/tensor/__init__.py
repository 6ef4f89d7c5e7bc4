from apps.tensor.functional import (
    BatchNormState,
    activation,
    batch_norm2d,
    conv2d,
    conv_transpose2d,
    frozen_statistics,
    leaky_relu,
    relu,
    tanh,
)
from apps.tensor.gradcheck import GradCheckReport, gradient_check
from apps.tensor.tensor import (
    Function,
    Tape,
    Tensor,
    backward,
    no_grad,
    use_dtype,
)

__all__ = [
    "BatchNormState",
    "Function",
    "GradCheckReport",
    "Tape",
    "Tensor",
    "activation",
    "backward",
    "batch_norm2d",
    "conv2d",
    "conv_transpose2d",
    "frozen_statistics",
    "gradient_check",
    "leaky_relu",
    "no_grad",
    "relu",
    "tanh",
    "use_dtype",
]
