"""Percolation isoperimetry laboratory.

Bond percolation sampling on finite lattice boxes, minimal-cutset surface
tension, Wulff crystal construction, modified Cheeger solvers, and k-cube
coarse graining, with a compiled kernel core and a pure numpy/scipy fallback.
"""

__version__ = "0.1.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
