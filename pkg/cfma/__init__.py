"""CFMA MIMO - compute-forward multiple access rates for two-user Gaussian MIMO MACs."""

__version__ = "0.1.0"
