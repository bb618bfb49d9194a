"""Yield-curve forecasting with a dynamic Gaussian-process filter, VAR and dynamic Nelson-Siegel comparators."""

__version__ = "0.1.0"
