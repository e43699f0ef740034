"""Compatibility of Weyl-covariant quantum channels on finite and Gaussian phase spaces."""

__version__ = "0.1.0"
