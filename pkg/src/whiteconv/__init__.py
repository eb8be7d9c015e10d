"""Compressive sensing with white random convolution and fixed subsampling."""

__version__ = "0.1.0"
