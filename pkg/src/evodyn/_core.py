"""Shared mean-field and storage formulas on raw weight/payoff arrays.

The two hot field kernels (BNN, Smith) route through a compiled backend
when the extension built, with a NumPy fallback selected at import time
(set EVODYN_PURE=1 to force the fallback). Impartial pairwise protocols
carry an arbitrary Python rate function and always use NumPy. Storage and
dissipation formulas are evaluated per sample, not per integration stage,
so they stay in NumPy.

Orientation convention for pairwise rates: ``rate(j -> i) = phi(rho_i -
rho_j)``, so inflow to i weighs sources by population mass x_j and the
destination by reference weight lam_i.
"""

import os

from evodyn import _kernels_np

if os.environ.get("EVODYN_PURE"):
    _backend = _kernels_np
    _backend_name = "numpy"
else:
    try:
        from evodyn import _kernels as _backend

        _backend_name = "cython"
    except ImportError:
        _backend = _kernels_np
        _backend_name = "numpy"

import numpy as np


def kernel_backend() -> str:
    """Which mean-field kernel implementation is active."""
    return _backend_name


def bnn_field(x, rho, lam):
    return _backend.bnn_field(x, rho, lam)


def smith_field(x, rho, lam):
    return _backend.smith_field(x, rho, lam)


def impartial_field(x, rho, lam, phi):
    m = np.asarray(phi(rho[:, None] - rho[None, :]), dtype=float)
    return lam * (m @ x) - x * (m.T @ lam)


def field_eval(kind, phi, x, rho, lam):
    if kind == "bnn":
        return bnn_field(x, rho, lam)
    if kind == "smith":
        return smith_field(x, rho, lam)
    if kind == "impartial":
        return impartial_field(x, rho, lam, phi)
    raise ValueError(f"unknown protocol kind {kind!r}")


def bnn_excess(x, rho):
    """Positive part of payoff minus population-average payoff."""
    return np.maximum(rho - np.dot(rho, x), 0.0)


def bnn_storage(x, rho, lam):
    e = bnn_excess(x, rho)
    return 0.5 * float(np.dot(lam, e * e))


def bnn_sigma(x, rho, lam):
    # <rho, field> = <lam, e^2> identically; the squared form cannot round
    # below zero when the excess is pure noise
    e = bnn_excess(x, rho)
    return float(np.dot(lam, e * e)) * float(np.dot(lam, e))


def pc_storage_lin(w, rho, lam, tau):
    """sum_i w_i sum_j lam_j tau(rho_j - rho_i); linear in w."""
    t = np.asarray(tau(rho[None, :] - rho[:, None]), dtype=float)
    return float(w @ (t @ lam))


def pc_sigma(x, rho, lam, phi, tau):
    v = impartial_field(x, rho, lam, phi)
    return -pc_storage_lin(v, rho, lam, tau)


def bnn_storage_derivative(x, rho, lam, eta):
    """d/dt of the BNN storage along (field, eta), from the closed forms."""
    e = bnn_excess(x, rho)
    d1 = -bnn_sigma(x, rho, lam)
    d2 = float(np.dot(lam * e, eta - np.dot(eta, x)))
    return d1 + d2


def pc_storage_derivative(x, rho, lam, phi, tau, eta):
    """d/dt of the pairwise storage along (field, eta), from the closed forms."""
    v = impartial_field(x, rho, lam, phi)
    d1 = pc_storage_lin(v, rho, lam, tau)
    diff = rho[None, :] - rho[:, None]
    p = np.asarray(phi(diff), dtype=float)
    ediff = eta[None, :] - eta[:, None]
    d2 = float(x @ ((p * ediff) @ lam))
    return d1 + d2
