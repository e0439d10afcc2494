"""camix - Convex Analysis of Mixtures for non-negative blind source separation."""

__version__ = "0.1.0"
