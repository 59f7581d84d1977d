"""A priori estimation of Mori-Zwanzig memory kernels."""

__version__ = "0.1.0"
