from .ops import (
    BN_EPS,
    BN_MOMENTUM,
    add,
    batchnorm2d,
    channel_mask,
    concat_channels,
    conv2d,
    conv_output_size,
    global_avg_pool,
    linear,
    maxpool2d,
    mul,
    relu,
    scale,
    softmax,
    softmax_cross_entropy,
    sum_all,
)
from .optim import SGDM, sgdm_step
from .tensor import NumericError, Tape, Tensor

__all__ = [
    "BN_EPS", "BN_MOMENTUM", "NumericError", "SGDM", "Tape", "Tensor", "add", "batchnorm2d",
    "channel_mask", "concat_channels", "conv2d", "conv_output_size", "global_avg_pool", "linear",
    "maxpool2d", "mul", "relu", "scale", "sgdm_step", "softmax", "softmax_cross_entropy", "sum_all",
]
