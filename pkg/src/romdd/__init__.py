"""Component reduced-order models for Poisson and Stokes problems on grid layouts."""

__version__ = "0.1.0"
