from .gradcheck import GradCheckReport, gradcheck
from .metrics import confusion_counts, iou, overall_accuracy
from .ops import (
    add_backward,
    add_forward,
    batchnorm_backward,
    batchnorm_forward,
    bce_loss,
    concat_channels_backward,
    concat_channels_forward,
    conv2d_backward,
    conv2d_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    mul_backward,
    mul_forward,
    nearest_upsample2x_backward,
    nearest_upsample2x_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
    transposed_conv2x_backward,
    transposed_conv2x_forward,
)
from .optim import AdamState, adam_step, init_adam

__all__ = [
    "AdamState",
    "GradCheckReport",
    "adam_step",
    "add_backward",
    "add_forward",
    "batchnorm_backward",
    "batchnorm_forward",
    "bce_loss",
    "concat_channels_backward",
    "concat_channels_forward",
    "confusion_counts",
    "conv2d_backward",
    "conv2d_forward",
    "gradcheck",
    "init_adam",
    "iou",
    "maxpool2x2_backward",
    "maxpool2x2_forward",
    "mul_backward",
    "mul_forward",
    "nearest_upsample2x_backward",
    "nearest_upsample2x_forward",
    "overall_accuracy",
    "relu_backward",
    "relu_forward",
    "sigmoid_backward",
    "sigmoid_forward",
    "transposed_conv2x_backward",
    "transposed_conv2x_forward",
]
