"""Numerical verification tools for Bochner-Riesz means of the twisted Laplacian on the plane.

Modules: cutoffs (smooth partitions), propagator (Mehler kernel and phase),
spectral (projections and Riesz means), oscillatory_kernels ([eta]^lambda
kernels), stationary_phase (asymptotics and scaled geometry), operator_lab
(norm estimation and scaling scans), acceptance, reports and cli.
"""

__version__ = "0.1.0"
