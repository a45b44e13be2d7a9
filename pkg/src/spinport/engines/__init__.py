"""Numerical engines: exact diagonalization, Gaussian covariance and truncated Wigner."""
