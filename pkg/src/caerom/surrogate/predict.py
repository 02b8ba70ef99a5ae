"""Online predictor: parameters -> latent vector -> solution matrix."""

from dataclasses import dataclass

import numpy as np

from caerom.errors import CompatibilityError, DimensionError


@dataclass
class Prediction:
    values: np.ndarray  # (d, n_t), or (B, d, n_t) for a batch
    latent: np.ndarray
    out_of_range: object  # bool, or a bool array for a batch

    @property
    def any_out_of_range(self):
        return bool(np.any(self.out_of_range))


def check_compatible(ffnn, cae):
    if ffnn.arch.n_out != cae.latent_dim:
        raise CompatibilityError(
            f"regression network outputs {ffnn.arch.n_out} values, autoencoder latent size is {cae.latent_dim}"
        )


def predict(theta, ffnn, cae):
    """Surrogate solution for one parameter vector ``(n,)`` or a batch ``(B, n)``.

    Parameters outside the box seen in training are still evaluated; the
    result carries an ``out_of_range`` flag instead of raising.
    """
    check_compatible(ffnn, cae)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = theta[None]
    if theta.shape[-1] != ffnn.arch.n_in:
        raise DimensionError(f"expected {ffnn.arch.n_in} parameters, got shape {theta.shape}")
    z = ffnn(theta)
    values = cae.decode(z)
    outside = ~np.asarray(ffnn.in_range(theta), dtype=bool)
    return Prediction(values, z, bool(outside) if theta.ndim == 1 else outside)
