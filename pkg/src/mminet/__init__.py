"""Supervised dimensionality reduction by stochastic mutual-information gradients."""

__version__ = "0.1.0"
