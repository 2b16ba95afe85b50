"""Discrete measures on a strategy grid: norms, pairings, CDFs, support.

Probability measures are population states; signed measures appear as
differences of states and as mean-field vectors (tangent directions with
zero total mass). The bounded-Lipschitz norm is computed exactly as a
small linear program; on a 1-D grid the Lipschitz constraints between
adjacent points imply all pairwise ones.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from evodyn.strategy_space import StrategyGrid, require_same_grid

PROBABILITY = "probability"
SIGNED = "signed"

NEG_WEIGHT_TOL = 1e-12
PROB_MASS_TOL = 1e-9
TANGENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Mass per grid point; ``kind`` is "probability" or "signed"."""

    grid: StrategyGrid
    weights: np.ndarray
    kind: str = PROBABILITY

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.n,):
            raise ValueError("weights length must match grid")
        if self.kind == PROBABILITY:
            if np.any(w < -NEG_WEIGHT_TOL):
                raise ValueError("negative weight beyond tolerance in probability measure")
            w = np.maximum(w, 0.0)
            if abs(w.sum() - 1.0) > PROB_MASS_TOL:
                raise ValueError("probability weights must sum to 1 within 1e-9")
        elif self.kind != SIGNED:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        object.__setattr__(self, "weights", w)

    def mass(self) -> float:
        return float(self.weights.sum())

    def is_tangent(self, tol: float = TANGENT_TOL) -> bool:
        return self.kind == SIGNED and abs(self.mass()) <= tol

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        require_same_grid(self.grid, other.grid)
        return DiscreteMeasure(self.grid, self.weights + other.weights, SIGNED)

    def __sub__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        require_same_grid(self.grid, other.grid)
        return DiscreteMeasure(self.grid, self.weights - other.weights, SIGNED)

    def __mul__(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.grid, c * self.weights, SIGNED)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class PayoffVector:
    """Payoff value per grid point (a sampled continuous payoff function)."""

    grid: StrategyGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError("values length must match grid")
        object.__setattr__(self, "values", v)


def dirac(grid: StrategyGrid, index: int) -> DiscreteMeasure:
    """Unit mass at grid point ``index``."""
    if not 0 <= index < grid.n:
        raise IndexError("dirac index out of range")
    w = np.zeros(grid.n)
    w[index] = 1.0
    return DiscreteMeasure(grid, w, PROBABILITY)


def uniform_measure(grid: StrategyGrid) -> DiscreteMeasure:
    return DiscreteMeasure(grid, np.full(grid.n, 1.0 / grid.n), PROBABILITY)


def gaussian_on_grid(grid: StrategyGrid, mean: float, variance: float) -> DiscreteMeasure:
    """Gaussian density sampled at the grid points and normalized."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    w = np.exp(-((grid.points - mean) ** 2) / (2.0 * variance))
    return DiscreteMeasure(grid, w / w.sum(), PROBABILITY)


def random_measure(grid: StrategyGrid, seed: int) -> DiscreteMeasure:
    """Uniform draw from the simplex: w_i = -ln(u_i) / sum_j -ln(u_j)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    e = -np.log1p(-rng.random(grid.n))  # exponential(1), avoids log(0)
    return DiscreteMeasure(grid, e / e.sum(), PROBABILITY)


def pairing(rho: PayoffVector, mu: DiscreteMeasure) -> float:
    """<rho, mu> = integral of the payoff function against the measure."""
    require_same_grid(rho.grid, mu.grid)
    return float(np.dot(rho.values, mu.weights))


def tv_norm(mu: DiscreteMeasure) -> float:
    return float(np.abs(mu.weights).sum())


def bl_norm(nu: DiscreteMeasure) -> float:
    """Exact bounded-Lipschitz norm of a signed measure on a 1-D grid.

    Maximizes sum_i g_i nu_i over test vectors g with |g_i| <= 1 and
    |g_{i+1} - g_i| <= s_{i+1} - s_i, solved as a linear program.
    """
    w = nu.weights
    if not np.any(w):
        return 0.0
    n = w.size
    if n == 1:
        return float(abs(w[0]))
    gaps = np.diff(nu.grid.points)
    m = n - 1
    rows = np.arange(m)
    # rows 0..m-1:  g_{i+1} - g_i <= gap_i;  rows m..2m-1: the reverse
    row_idx = np.concatenate([rows, rows, m + rows, m + rows])
    col_idx = np.concatenate([rows, rows + 1, rows, rows + 1])
    data = np.concatenate([-np.ones(m), np.ones(m), np.ones(m), -np.ones(m)])
    a = coo_matrix((data, (row_idx, col_idx)), shape=(2 * m, n))
    b = np.concatenate([gaps, gaps])
    res = linprog(-w, A_ub=a, b_ub=b, bounds=(-1.0, 1.0), method="highs")
    if not res.success:
        raise RuntimeError(f"BL-norm linear program failed: {res.message}")
    return float(-res.fun)


def bl_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    require_same_grid(mu.grid, nu.grid)
    return bl_norm(mu - nu)


def cdf(mu: DiscreteMeasure) -> np.ndarray:
    """Distribution function values mu([lower, s_i]) at the grid points."""
    if mu.kind != PROBABILITY:
        raise ValueError("cdf is defined for probability measures")
    return np.cumsum(mu.weights)


def support(mu: DiscreteMeasure, tol: float = 1e-9) -> np.ndarray:
    """Indices carrying mass above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return np.flatnonzero(mu.weights > tol)
