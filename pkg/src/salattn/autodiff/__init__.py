from .tensor import (Tensor, as_tensor, backward, concat, grad_enabled, matmul, no_grad, parameter,
                     reshape, split, stack, transpose, zero_grad)
from .functional import (activation, bilinear_resize, conv2d, fully_connected, logistic, maxpool2, relu,
                         tanh)
from .optim import Adam, AdamState, adam_step
from .init import make_rng, xavier_init, zeros_param
from .gradcheck import GradCheckResult, grad_check, numerical_grad

__all__ = [
    "Tensor", "as_tensor", "backward", "concat", "grad_enabled", "matmul", "no_grad", "parameter",
    "reshape", "split", "stack", "transpose", "zero_grad",
    "activation", "bilinear_resize", "conv2d", "fully_connected", "logistic", "maxpool2", "relu", "tanh",
    "Adam", "AdamState", "adam_step", "make_rng", "xavier_init", "zeros_param",
    "GradCheckResult", "grad_check", "numerical_grad",
]
