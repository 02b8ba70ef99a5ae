"""Convolutional-autoencoder surrogates for parametrized time-dependent PDEs."""

__version__ = "0.1.0"
