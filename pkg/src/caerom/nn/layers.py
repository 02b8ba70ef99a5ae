"""Layers with hand-derived forward and backward passes.

Every trainable layer is a thin stateful wrapper around a pair of pure
functions (``*_forward`` returning ``(output, cache)`` and ``*_backward``
consuming that cache). The layer keeps the most recent cache so a network can
be run forward and then backward without threading caches by hand.
"""

from dataclasses import dataclass

import numpy as np

from caerom.errors import ConfigurationError, DimensionError, StateError
from caerom.nn import functional as F

ACTIVATIONS = ("linear", "relu", "tanh")


def activate(z, name):
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0)
    if name == "tanh":
        return np.tanh(z)
    raise ConfigurationError(f"unknown activation {name!r}")


def activation_grad(z, y, grad_y, name):
    """Multiply ``grad_y`` by the activation derivative at pre-activation ``z``."""
    if name == "linear":
        return grad_y
    if name == "relu":
        return grad_y * (z > 0)
    if name == "tanh":
        return grad_y * (1 - y * y)
    raise ConfigurationError(f"unknown activation {name!r}")


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


@dataclass
class LayerCache:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    params: dict
    hyper: dict


def _check_cache(cache):
    if cache is None:
        raise StateError("backward called without a forward cache")


# ---------------------------------------------------------------------------
# functional forms
# ---------------------------------------------------------------------------

def dense_forward(x, layer):
    """``activation(x @ W.T + b)`` for a batch ``(B, in)`` or single vector ``(in,)``."""
    x = np.asarray(x)
    W, b = layer.params["W"], layer.params["b"]
    if x.shape[-1] != W.shape[1]:
        raise DimensionError(f"dense layer expects {W.shape[1]} inputs, got {x.shape[-1]}")
    z = x @ W.T + b
    y = activate(z, layer.activation)
    return y, LayerCache(x, z, y, {"W": W}, {"activation": layer.activation})


def dense_backward(grad_out, cache):
    _check_cache(cache)
    gz = activation_grad(cache.z, cache.y, grad_out, cache.hyper["activation"])
    W = cache.params["W"]
    x2 = cache.x.reshape(-1, W.shape[1])
    gz2 = gz.reshape(-1, W.shape[0])
    grad_W = gz2.T @ x2
    grad_b = gz2.sum(axis=0)
    grad_x = (gz2 @ W).reshape(cache.x.shape)
    return grad_x, grad_W, grad_b


def conv1d_forward(x, layer):
    p = layer.params
    z, cols = F.conv1d(x, p["filters"], p["bias"], stride=layer.stride, padding=layer.padding,
                       return_cols=True)
    y = activate(z, layer.activation)
    hyper = {"activation": layer.activation, "stride": layer.stride, "padding": layer.padding, "cols": cols}
    return y, LayerCache(np.asarray(x), z, y, {"filters": p["filters"]}, hyper)


def conv1d_backward(grad_out, cache):
    _check_cache(cache)
    h = cache.hyper
    gz = activation_grad(cache.z, cache.y, grad_out, h["activation"])
    return F.conv1d_grads(cache.x, cache.params["filters"], gz, stride=h["stride"], padding=h["padding"],
                          cols=h["cols"])


def deconv1d_forward(x, layer):
    p = layer.params
    z = F.deconv1d(x, p["filters"], p["bias"], stride=layer.stride, output_crop=layer.output_crop)
    y = activate(z, layer.activation)
    hyper = {"activation": layer.activation, "stride": layer.stride, "output_crop": layer.output_crop}
    return y, LayerCache(np.asarray(x), z, y, {"filters": p["filters"]}, hyper)


def deconv1d_backward(grad_out, cache):
    _check_cache(cache)
    h = cache.hyper
    gz = activation_grad(cache.z, cache.y, grad_out, h["activation"])
    return F.deconv1d_grads(
        cache.x, cache.params["filters"], gz, stride=h["stride"], output_crop=h["output_crop"]
    )


# ---------------------------------------------------------------------------
# layer objects
# ---------------------------------------------------------------------------

class Layer:
    """Base class. Shapes passed to ``output_shape`` exclude the batch axis."""

    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def output_shape(self, in_shape):
        raise NotImplementedError

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def config(self):
        return {"kind": self.kind}

    def zero_cache(self):
        self._cache = None


def _check_activation(name):
    if name not in ACTIVATIONS:
        raise ConfigurationError(f"activation must be one of {ACTIVATIONS}, got {name!r}")
    return name


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, out_features, activation="linear", rng=None, dtype=np.float32):
        super().__init__()
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        self.activation = _check_activation(activation)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = glorot_uniform(
            rng, (self.out_features, self.in_features), self.in_features, self.out_features, dtype
        )
        self.params["b"] = np.zeros(self.out_features, dtype=dtype)

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.in_features,):
            raise DimensionError(f"dense layer expects ({self.in_features},), got {tuple(in_shape)}")
        return (self.out_features,)

    def forward(self, x):
        y, self._cache = dense_forward(x, self)
        return y

    def backward(self, grad_out):
        gx, self.grads["W"], self.grads["b"] = dense_backward(grad_out, self._cache)
        return gx

    def config(self):
        return {
            "kind": self.kind,
            "in_features": self.in_features,
            "out_features": self.out_features,
            "activation": self.activation,
        }


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_channels, n_filters, kernel_len, stride=1, padding=0,
                 activation="linear", rng=None, dtype=np.float32):
        super().__init__()
        if kernel_len < 1 or stride < 1 or padding < 0:
            raise ConfigurationError("conv1d needs kernel_len >= 1, stride >= 1, padding >= 0")
        self.in_channels = int(in_channels)
        self.n_filters = int(n_filters)
        self.kernel_len = int(kernel_len)
        self.stride = int(stride)
        self.padding = int(padding)
        self.activation = _check_activation(activation)
        rng = rng if rng is not None else np.random.default_rng(0)
        shape = (self.n_filters, self.in_channels, self.kernel_len)
        self.params["filters"] = glorot_uniform(
            rng, shape, self.in_channels * self.kernel_len, self.n_filters * self.kernel_len, dtype
        )
        self.params["bias"] = np.zeros(self.n_filters, dtype=dtype)

    def output_shape(self, in_shape):
        ch, length = in_shape
        if ch != self.in_channels:
            raise DimensionError(f"conv1d expects {self.in_channels} channels, got {ch}")
        out_len = F.conv1d_output_length(length, self.kernel_len, self.stride, self.padding)
        if out_len < 1:
            raise ConfigurationError(f"conv1d output length {out_len} < 1 for input length {length}")
        return (self.n_filters, out_len)

    def forward(self, x):
        y, self._cache = conv1d_forward(x, self)
        return y

    def backward(self, grad_out):
        gx, self.grads["filters"], self.grads["bias"] = conv1d_backward(grad_out, self._cache)
        return gx

    def config(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "n_filters": self.n_filters,
            "kernel_len": self.kernel_len,
            "stride": self.stride,
            "padding": self.padding,
            "activation": self.activation,
        }


class Deconv1d(Layer):
    kind = "deconv1d"

    def __init__(self, in_channels, out_channels, kernel_len, stride=1, output_crop=0,
                 activation="linear", rng=None, dtype=np.float32):
        super().__init__()
        if kernel_len < 1 or stride < 1 or output_crop < 0:
            raise ConfigurationError("deconv1d needs kernel_len >= 1, stride >= 1, output_crop >= 0")
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel_len = int(kernel_len)
        self.stride = int(stride)
        self.output_crop = int(output_crop)
        self.activation = _check_activation(activation)
        rng = rng if rng is not None else np.random.default_rng(0)
        shape = (self.in_channels, self.out_channels, self.kernel_len)
        self.params["filters"] = glorot_uniform(
            rng, shape, self.in_channels * self.kernel_len, self.out_channels * self.kernel_len, dtype
        )
        self.params["bias"] = np.zeros(self.out_channels, dtype=dtype)

    def output_shape(self, in_shape):
        ch, length = in_shape
        if ch != self.in_channels:
            raise DimensionError(f"deconv1d expects {self.in_channels} channels, got {ch}")
        natural = (length - 1) * self.stride + self.kernel_len
        if self.output_crop >= natural:
            raise ConfigurationError(f"output_crop {self.output_crop} >= natural length {natural}")
        return (self.out_channels, natural - self.output_crop)

    def forward(self, x):
        y, self._cache = deconv1d_forward(x, self)
        return y

    def backward(self, grad_out):
        gx, self.grads["filters"], self.grads["bias"] = deconv1d_backward(grad_out, self._cache)
        return gx

    def config(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_len": self.kernel_len,
            "stride": self.stride,
            "output_crop": self.output_crop,
            "activation": self.activation,
        }


class AvgPool1d(Layer):
    kind = "avg_pool1d"

    def __init__(self, window):
        super().__init__()
        if window < 2:
            raise ConfigurationError("pooling window must be >= 2")
        self.window = int(window)

    def output_shape(self, in_shape):
        ch, length = in_shape
        if length < self.window:
            raise ConfigurationError(f"input length {length} shorter than pooling window {self.window}")
        return (ch, length // self.window)

    def forward(self, x):
        self._cache = np.shape(x)[-1]
        return F.avg_pool1d(x, self.window)

    def backward(self, grad_out):
        _check_cache(self._cache)
        return F.avg_pool1d_grad(grad_out, self.window, self._cache)

    def config(self):
        return {"kind": self.kind, "window": self.window}


class AvgUnpool1d(Layer):
    kind = "avg_unpool1d"

    def __init__(self, window):
        super().__init__()
        if window < 2:
            raise ConfigurationError("pooling window must be >= 2")
        self.window = int(window)

    def output_shape(self, in_shape):
        ch, length = in_shape
        return (ch, length * self.window)

    def forward(self, x):
        self._cache = True
        return F.avg_unpool1d(x, self.window)

    def backward(self, grad_out):
        _check_cache(self._cache)
        return F.avg_unpool1d_grad(grad_out, self.window)

    def config(self):
        return {"kind": self.kind, "window": self.window}


class MaxPool1d(Layer):
    kind = "max_pool1d"

    def __init__(self, window):
        super().__init__()
        if window < 2:
            raise ConfigurationError("pooling window must be >= 2")
        self.window = int(window)
        self.argmax = None

    def output_shape(self, in_shape):
        ch, length = in_shape
        if length < self.window:
            raise ConfigurationError(f"input length {length} shorter than pooling window {self.window}")
        return (ch, length // self.window)

    def forward(self, x):
        y, self.argmax = F.max_pool1d(x, self.window)
        self._cache = np.shape(x)[-1]
        return y

    def backward(self, grad_out):
        _check_cache(self._cache)
        return F.max_unpool1d(grad_out, self.argmax, self.window, out_len=self._cache)

    def config(self):
        return {"kind": self.kind, "window": self.window}


class MaxUnpool1d(Layer):
    """Scatters values back to the argmax positions recorded by a paired :class:`MaxPool1d`."""

    kind = "max_unpool1d"

    def __init__(self, pool):
        super().__init__()
        self.pool = pool
        self.window = pool.window

    def output_shape(self, in_shape):
        ch, length = in_shape
        return (ch, length * self.window)

    def forward(self, x):
        if self.pool.argmax is None:
            raise StateError("paired max-pool layer has no recorded argmax")
        self._cache = self.pool.argmax
        return F.max_unpool1d(x, self._cache, self.window)

    def backward(self, grad_out):
        _check_cache(self._cache)
        return np.take_along_axis(np.asarray(grad_out), self._cache, axis=-1)

    def config(self):
        return {"kind": self.kind, "window": self.window}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        _check_cache(self._cache)
        return grad_out.reshape(self._cache)

    def config(self):
        return {"kind": self.kind}


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise DimensionError(f"cannot reshape {tuple(in_shape)} to {self.shape}")
        return self.shape

    def forward(self, x):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad_out):
        _check_cache(self._cache)
        return grad_out.reshape(self._cache)

    def config(self):
        return {"kind": self.kind, "shape": list(self.shape)}


class Sequential:
    """An ordered stack of layers run on batched input."""

    def __init__(self, layers):
        self.layers = list(layers)

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def output_shape(self, in_shape):
        shape = tuple(in_shape)
        for layer in self.layers:
            shape = tuple(layer.output_shape(shape))
        return shape

    def parameters(self):
        """``(layer_index, name, array)`` triples in declaration order."""
        return [(i, name, arr) for i, layer in enumerate(self.layers) for name, arr in layer.params.items()]

    def gradients(self):
        return [self.layers[i].grads[name] for i, name, _ in self.parameters()]

    def clear_caches(self):
        for layer in self.layers:
            layer.zero_cache()


def build_layer(cfg, rng=None, dtype=np.float32):
    """Instantiate a layer from a ``config()`` dictionary."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "dense":
        return Dense(rng=rng, dtype=dtype, **cfg)
    if kind == "conv1d":
        return Conv1d(rng=rng, dtype=dtype, **cfg)
    if kind == "deconv1d":
        return Deconv1d(rng=rng, dtype=dtype, **cfg)
    if kind == "avg_pool1d":
        return AvgPool1d(**cfg)
    if kind == "avg_unpool1d":
        return AvgUnpool1d(**cfg)
    if kind == "max_pool1d":
        return MaxPool1d(**cfg)
    if kind == "flatten":
        return Flatten()
    if kind == "reshape":
        return Reshape(**cfg)
    raise ConfigurationError(f"unknown layer kind {kind!r}")
