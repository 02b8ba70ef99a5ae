"""Layer-stack descriptions for the autoencoder and the parameter-to-latent network.

Architectures are plain data (lists of layer config dicts, see
:func:`caerom.nn.build_layer`) so they can be written into checkpoint headers
and pipeline configs verbatim. The shape validator walks a stack with the
same ``output_shape`` rules the layers use at run time.
"""

from dataclasses import dataclass, field

from caerom.errors import ConfigurationError, DimensionError
from caerom.nn import functional as F
from caerom.nn.layers import ACTIVATIONS, build_layer


@dataclass
class CaeArchitecture:
    input_shape: tuple
    latent_dim: int
    encoder: list = field(default_factory=list)
    decoder: list = field(default_factory=list)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        self.latent_dim = int(self.latent_dim)
        self.encoder = [dict(c) for c in self.encoder]
        self.decoder = [dict(c) for c in self.decoder]

    def to_dict(self):
        return {
            "input_shape": list(self.input_shape),
            "latent_dim": self.latent_dim,
            "encoder": [dict(c) for c in self.encoder],
            "decoder": [dict(c) for c in self.decoder],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["input_shape"]), d["latent_dim"], d["encoder"], d["decoder"])

    def validate(self):
        """Check the stacks map ``input_shape -> (latent_dim,) -> input_shape`` exactly.

        Returns the list of intermediate shapes (encoder then decoder).
        Pooling layers must not drop trailing samples.
        """
        if len(self.input_shape) != 2:
            raise ConfigurationError(f"input_shape must be (d, n_t), got {self.input_shape}")
        trace = [self.input_shape]
        shape = self.input_shape
        for cfg in self.encoder:
            if cfg["kind"] in ("avg_pool1d", "max_pool1d") and shape[1] % cfg["window"]:
                raise ConfigurationError(
                    f"pooling window {cfg['window']} does not divide length {shape[1]}"
                )
            shape = _shape_of(cfg, shape)
            trace.append(shape)
        if shape != (self.latent_dim,):
            raise ConfigurationError(f"encoder ends at {shape}, expected ({self.latent_dim},)")
        for cfg in self.decoder:
            shape = _shape_of(cfg, shape)
            trace.append(shape)
        if shape != self.input_shape:
            raise ConfigurationError(f"decoder ends at {shape}, expected {self.input_shape}")
        if self.latent_dim >= self.input_shape[0] * self.input_shape[1]:
            raise ConfigurationError("latent dimension is not smaller than the input size")
        return trace


def _shape_of(cfg, shape):
    # build a throwaway layer without allocating weights for the big conv stacks
    kind = cfg["kind"]
    try:
        if kind == "conv1d":
            if shape[0] != cfg["in_channels"]:
                raise DimensionError(f"conv1d expects {cfg['in_channels']} channels, got {shape[0]}")
            n = F.conv1d_output_length(shape[1], cfg["kernel_len"], cfg.get("stride", 1), cfg.get("padding", 0))
            if n < 1:
                raise ConfigurationError(f"conv1d output length {n} < 1")
            return (cfg["n_filters"], n)
        if kind == "deconv1d":
            if shape[0] != cfg["in_channels"]:
                raise DimensionError(f"deconv1d expects {cfg['in_channels']} channels, got {shape[0]}")
            n = F.deconv1d_output_length(shape[1], cfg["kernel_len"], cfg.get("stride", 1), cfg.get("output_crop", 0))
            if n < 1 or cfg.get("output_crop", 0) < 0:
                raise ConfigurationError(f"deconv1d output length {n} < 1")
            return (cfg["out_channels"], n)
        return tuple(build_layer(cfg).output_shape(shape))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed layer config {cfg}: {exc}") from exc


def conv_autoencoder(input_shape, latent_dim, filters=(64, 32), kernel_len=5, stride=2,
                     pool_window=5, hidden_activation="relu", decoder_dense_activation="linear",
                     decoder_unpool=False):
    """Build a Conv1d/AvgPool/Dense autoencoder description with a deconvolution decoder.

    Convolutions run along the time axis with the DOFs as input channels.
    Each encoder convolution uses ``(kernel_len - 1) // 2`` zero padding; the
    matching decoder deconvolution gets the trailing crop that restores the
    exact length. Raises :class:`ConfigurationError` when the pooled length
    does not divide evenly.

    By default the decoder's dense layer produces the full pre-pooling
    feature map. With ``decoder_unpool`` it produces the pooled map and an
    AvgUnpool layer mirrors the encoder instead. Replication makes every
    pooled block constant in time, and strided deconvolutions of a constant
    are periodic with period ``stride``, so that variant cannot represent
    smooth temporal trends inside a block.
    """
    d, n_t = (int(s) for s in input_shape)
    pad = (kernel_len - 1) // 2
    encoder, lengths = [], [n_t]
    channels = [d] + list(filters)
    for c_in, c_out in zip(channels[:-1], channels[1:]):
        encoder.append({
            "kind": "conv1d", "in_channels": c_in, "n_filters": c_out, "kernel_len": kernel_len,
            "stride": stride, "padding": pad, "activation": hidden_activation,
        })
        lengths.append(F.conv1d_output_length(lengths[-1], kernel_len, stride, pad))
    conv_len = lengths[-1]
    if pool_window:
        if conv_len % pool_window:
            raise ConfigurationError(
                f"convolution output length {conv_len} is not divisible by pool window {pool_window}"
            )
        encoder.append({"kind": "avg_pool1d", "window": pool_window})
        pooled = conv_len // pool_window
    else:
        pooled = conv_len
    flat = channels[-1] * pooled
    encoder.append({"kind": "flatten"})
    encoder.append({"kind": "dense", "in_features": flat, "out_features": latent_dim, "activation": "linear"})

    unpool = bool(pool_window) and decoder_unpool
    dec_len = pooled if unpool else conv_len
    decoder = [
        {"kind": "dense", "in_features": latent_dim, "out_features": channels[-1] * dec_len,
         "activation": decoder_dense_activation},
        {"kind": "reshape", "shape": [channels[-1], dec_len]},
    ]
    if unpool:
        decoder.append({"kind": "avg_unpool1d", "window": pool_window})
    rev = list(reversed(channels))
    for i, (c_in, c_out) in enumerate(zip(rev[:-1], rev[1:])):
        in_len = lengths[len(lengths) - 1 - i]
        target = lengths[len(lengths) - 2 - i]
        crop = F.deconv1d_output_length(in_len, kernel_len, stride) - target
        if crop < 0:
            raise ConfigurationError(f"deconvolution cannot reach length {target} from {in_len}")
        last = i == len(rev) - 2
        decoder.append({
            "kind": "deconv1d", "in_channels": c_in, "out_channels": c_out, "kernel_len": kernel_len,
            "stride": stride, "output_crop": crop, "activation": "linear" if last else hidden_activation,
        })
    arch = CaeArchitecture((d, n_t), latent_dim, encoder, decoder)
    arch.validate()
    return arch


def burgers_cae(latent_dim=8):
    """Default autoencoder for the 200 x 100 Burgers solution matrices."""
    return conv_autoencoder((200, 100), latent_dim, filters=(64, 32), kernel_len=5, stride=2, pool_window=5)


def structural_cae(d, n_t, latent_dim=64, filters=(256, 128), kernel_len=5, stride=2, pool_window=5):
    """Default autoencoder for structural histories with ``d`` free DOFs."""
    return conv_autoencoder((d, n_t), latent_dim, filters=filters, kernel_len=kernel_len,
                            stride=stride, pool_window=pool_window)


@dataclass
class FfnnArchitecture:
    n_in: int
    n_out: int
    hidden: list = field(default_factory=lambda: [32, 32, 32, 32])
    activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        self.hidden = [int(h) for h in self.hidden]
        for act in (self.activation, self.output_activation):
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}")
        if self.n_in < 1 or self.n_out < 1 or any(h < 1 for h in self.hidden):
            raise ConfigurationError("layer widths must be positive")

    def layer_configs(self):
        widths = [self.n_in] + self.hidden + [self.n_out]
        out = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            act = self.output_activation if i == len(widths) - 2 else self.activation
            out.append({"kind": "dense", "in_features": a, "out_features": b, "activation": act})
        return out

    def to_dict(self):
        return {
            "n_in": self.n_in, "n_out": self.n_out, "hidden": list(self.hidden),
            "activation": self.activation, "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def burgers_ffnn(latent_dim=8):
    """1 -> 4 x 32 (ReLU) -> latent (linear)."""
    return FfnnArchitecture(1, latent_dim, [32] * 4)


def structural_ffnn(latent_dim=64, n_params=3):
    """3 -> 6 x 256 (ReLU) -> latent (linear)."""
    return FfnnArchitecture(n_params, latent_dim, [256] * 6)
