"""NumPy fallback for the compiled mean-field kernels (same signatures)."""

import numpy as np


def bnn_field(x, rho, lam):
    e = np.maximum(rho - np.dot(rho, x), 0.0)
    return lam * e * x.sum() - x * np.dot(lam, e)


def smith_field(x, rho, lam):
    d = np.maximum(rho[:, None] - rho[None, :], 0.0)  # d[i, j] = rate j -> i
    return lam * (d @ x) - x * (d.T @ lam)
