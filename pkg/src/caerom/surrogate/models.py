"""Autoencoder and regression network objects with their normalization constants."""

from dataclasses import dataclass

import numpy as np

from caerom.errors import DimensionError
from caerom.nn.layers import Sequential, build_layer
from caerom.surrogate.architecture import CaeArchitecture, FfnnArchitecture


@dataclass
class AffineScaling:
    """``normalized = (raw - offset) / scale``, elementwise with broadcasting."""

    offset: np.ndarray
    scale: np.ndarray

    def forward(self, raw):
        return (raw - self.offset) / self.scale

    def inverse(self, normalized):
        return normalized * self.scale + self.offset

    def to_dict(self):
        return {"offset": np.asarray(self.offset, float).tolist(), "scale": np.asarray(self.scale, float).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["offset"], dtype=float), np.asarray(d["scale"], dtype=float))

    @classmethod
    def identity(cls, n=None):
        shape = () if n is None else (n,)
        return cls(np.zeros(shape), np.ones(shape))


def minmax_scaling(data, lo=-1.0, hi=1.0, axis=None):
    """Affine map sending ``[min, max]`` of ``data`` (over ``axis``) to ``[lo, hi]``."""
    dmin = np.min(data, axis=axis)
    dmax = np.max(data, axis=axis)
    span = np.where(dmax > dmin, dmax - dmin, 1.0)
    scale = span / (hi - lo)
    offset = dmin - lo * scale
    return AffineScaling(np.asarray(offset, float), np.asarray(scale, float))


def _build_stack(configs, rng, dtype):
    return Sequential([build_layer(c, rng=rng, dtype=dtype) for c in configs])


class ConvAutoencoder:
    """Encoder/decoder pair acting on ``(d, n_t)`` solution matrices.

    ``encode``/``decode`` accept either one matrix (one latent vector) or a
    batch with a leading axis. The stored global scaling is applied on the
    way in and undone on the way out.
    """

    def __init__(self, arch, rng=None, dtype=np.float32, scaling=None):
        if not isinstance(arch, CaeArchitecture):
            arch = CaeArchitecture.from_dict(arch)
        arch.validate()
        self.arch = arch
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.encoder = _build_stack(arch.encoder, rng, self.dtype)
        self.decoder = _build_stack(arch.decoder, rng, self.dtype)
        self.scaling = scaling if scaling is not None else AffineScaling.identity()

    @property
    def latent_dim(self):
        return self.arch.latent_dim

    @property
    def input_shape(self):
        return self.arch.input_shape

    def parameters(self):
        return [a for _, _, a in self.encoder.parameters()] + [a for _, _, a in self.decoder.parameters()]

    def gradients(self):
        return self.encoder.gradients() + self.decoder.gradients()

    def normalize(self, U):
        return self.scaling.forward(np.asarray(U, dtype=float)).astype(self.dtype)

    def denormalize(self, X):
        return self.scaling.inverse(np.asarray(X, dtype=float))

    def encode(self, U):
        U = np.asarray(U)
        single = U.ndim == 2
        if U.shape[-2:] != self.input_shape:
            raise DimensionError(f"expected solution matrices of shape {self.input_shape}, got {U.shape}")
        X = self.normalize(U[None] if single else U)
        z = self.encoder.forward(X)
        return z[0] if single else z

    def decode(self, z, denormalize=True):
        z = np.asarray(z, dtype=self.dtype)
        single = z.ndim == 1
        if z.shape[-1] != self.latent_dim:
            raise DimensionError(f"expected latent vectors of length {self.latent_dim}, got {z.shape}")
        X = self.decoder.forward(z[None] if single else z)
        out = self.denormalize(X) if denormalize else X
        return out[0] if single else out

    def reconstruct(self, U):
        return self.decode(self.encode(U))


class FeedForward:
    """Parameter-to-latent regression network.

    Inputs are scaled affinely to ``[0, 1]`` per dimension with constants
    frozen from the training set; targets are standardized per component.
    """

    def __init__(self, arch, rng=None, dtype=np.float32, input_scaling=None, output_scaling=None):
        if not isinstance(arch, FfnnArchitecture):
            arch = FfnnArchitecture.from_dict(arch)
        self.arch = arch
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = _build_stack(arch.layer_configs(), rng, self.dtype)
        self.input_scaling = input_scaling if input_scaling is not None else AffineScaling.identity(arch.n_in)
        self.output_scaling = output_scaling if output_scaling is not None else AffineScaling.identity(arch.n_out)
        # training-range box in raw parameter units, used for out-of-range flags
        self.param_lo = None
        self.param_hi = None

    def parameters(self):
        return [a for _, _, a in self.net.parameters()]

    def gradients(self):
        return self.net.gradients()

    def scale_inputs(self, theta):
        return self.input_scaling.forward(np.asarray(theta, dtype=float)).astype(self.dtype)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        theta2 = theta[None] if single else theta
        if theta2.shape[-1] != self.arch.n_in:
            raise DimensionError(f"expected {self.arch.n_in} parameters, got {theta2.shape[-1]}")
        y = self.net.forward(self.scale_inputs(theta2))
        z = self.output_scaling.inverse(y.astype(float)).astype(self.dtype)
        return z[0] if single else z

    def in_range(self, theta):
        if self.param_lo is None:
            return np.ones(np.shape(theta)[:-1], dtype=bool) if np.ndim(theta) > 1 else True
        theta = np.asarray(theta, dtype=float)
        ok = np.all((theta >= self.param_lo) & (theta <= self.param_hi), axis=-1)
        return ok
