"""Hand-written neural-network kernels: dense, 1-D (de)convolution, pooling, MSE, Adam."""

from caerom.nn.layers import (
    AvgPool1d,
    AvgUnpool1d,
    Conv1d,
    Deconv1d,
    Dense,
    Flatten,
    MaxPool1d,
    MaxUnpool1d,
    Reshape,
    Sequential,
    build_layer,
    conv1d_backward,
    conv1d_forward,
    deconv1d_backward,
    deconv1d_forward,
    dense_backward,
    dense_forward,
)
from caerom.nn.functional import avg_pool1d, avg_unpool1d, max_pool1d, max_unpool1d
from caerom.nn.losses import mse_loss
from caerom.nn.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "AvgPool1d",
    "AvgUnpool1d",
    "Conv1d",
    "Deconv1d",
    "Dense",
    "Flatten",
    "MaxPool1d",
    "MaxUnpool1d",
    "Reshape",
    "Sequential",
    "adam_step",
    "avg_pool1d",
    "avg_unpool1d",
    "build_layer",
    "conv1d_backward",
    "conv1d_forward",
    "deconv1d_backward",
    "deconv1d_forward",
    "dense_backward",
    "dense_forward",
    "max_pool1d",
    "max_unpool1d",
    "mse_loss",
]
