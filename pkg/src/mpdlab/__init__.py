"""Marked length and Poincare determinant spectra on perturbed hyperbolic surfaces."""

__version__ = "0.1.0"
