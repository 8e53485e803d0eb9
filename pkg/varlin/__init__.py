"""
varlin - variance linearization for non-stationary dependent arrays.

This package builds variance-linearizing block partitions of triangular arrays,
martingale-coboundary decompositions on those blocks, and quantitative
diagnostics of the resulting limit theorems.
"""

__version__ = "0.1.0"
__all__ = ["__version__"]
