"""Payoff kernels and the linear games they induce.

A kernel f(s, s') is tabulated on the grid as a matrix A with A[i][j] =
f(s_i, s_j), so the mean payoff of state mu is the matrix-vector product
F(mu) = A mu and every downstream quantity is linear algebra. For these
linear games the derivative of mu |-> F(mu) in a direction nu is simply
F(nu), independent of the base point.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from evodyn.measures import PROBABILITY, DiscreteMeasure, PayoffVector
from evodyn.strategy_space import StrategyGrid, require_same_grid

MONOTONE_TOL = 1e-9

# Convention used by war_nash_equilibrium when turning the closed-form CDF
# into grid weights: the mass of each cell (s_{i-1}, s_i] goes to its right
# endpoint, which keeps the atom at T on-grid and the total mass exact.
BINNING_CONVENTION = "right-endpoint"


@dataclass(frozen=True, eq=False)
class ThetaSpec:
    """Smoothed step function for the continuous war of attrition.

    Logistic: 1 / (1 + exp(-alpha x)). Piecewise linear: x/(2 x0) + 1/2
    clipped to [0, 1]. Both satisfy Theta(0) = 1/2 and the symmetry
    Theta(x) + Theta(-x) = 1.
    """

    kind: str
    alpha: Optional[float] = None
    x0: Optional[float] = None

    def __post_init__(self):
        if self.kind == "logistic":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("logistic theta needs alpha > 0")
        elif self.kind == "piecewise_linear":
            if self.x0 is None or self.x0 <= 0:
                raise ValueError("piecewise-linear theta needs x0 > 0")
        else:
            raise ValueError(f"unknown theta kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logistic":
            return expit(self.alpha * x)
        return np.clip(x / (2.0 * self.x0) + 0.5, 0.0, 1.0)


def theta_logistic(alpha: float) -> ThetaSpec:
    return ThetaSpec("logistic", alpha=alpha)


def theta_piecewise_linear(x0: float) -> ThetaSpec:
    return ThetaSpec("piecewise_linear", x0=x0)


@dataclass(frozen=True, eq=False)
class PayoffKernel:
    """Tabulated bivariate payoff: matrix[i][j] = f(s_i, s_j)."""

    grid: StrategyGrid
    matrix: np.ndarray
    name: str = "table"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.ascontiguousarray(self.matrix, dtype=float)
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError("kernel matrix shape must match grid")
        object.__setattr__(self, "matrix", a)


def kernel_war_of_attrition(V: float, grid: StrategyGrid) -> PayoffKernel:
    """Discontinuous war of attrition: winner takes V, both pay the exit time.

    f(s, s') = V - s' when s' < s, V/2 - s on the tie diagonal, -s when
    s' > s. Requires the horizon T = upper to exceed V/2.
    """
    if V <= 0:
        raise ValueError("war of attrition needs V > 0")
    if grid.upper <= V / 2:
        raise ValueError("war of attrition needs grid upper > V/2")
    s = grid.points
    a = np.where(s[None, :] < s[:, None], V - s[None, :], -s[:, None])
    np.fill_diagonal(a, V / 2 - s)
    return PayoffKernel(grid, a, "war_of_attrition", {"V": float(V)})


def kernel_continuous_war(V: float, theta: ThetaSpec, grid: StrategyGrid) -> PayoffKernel:
    """Smoothed war of attrition: f(s, s') = V Theta(s - s') - min(s, s')."""
    if V <= 0:
        raise ValueError("continuous war needs V > 0")
    _check_theta_symmetry(theta)
    s = grid.points
    a = V * theta(s[:, None] - s[None, :]) - np.minimum(s[:, None], s[None, :])
    params = {"V": float(V), "theta_kind": theta.kind,
              "alpha": theta.alpha, "x0": theta.x0}
    return PayoffKernel(grid, a, "continuous_war", params)


def _check_theta_symmetry(theta: ThetaSpec, samples: int = 101) -> None:
    x = np.linspace(-3.0, 3.0, samples)
    if np.max(np.abs(theta(x) + theta(-x) - 1.0)) > 1e-9:
        raise ValueError("theta must satisfy Theta(x) + Theta(-x) = 1")


def kernel_cosine(grid: StrategyGrid) -> PayoffKernel:
    """Separable kernel f(s, s') = cos(2 pi s) - cos(2 pi s')."""
    c = np.cos(2.0 * np.pi * grid.points)
    return PayoffKernel(grid, c[:, None] - c[None, :], "cosine", {})


def kernel_from_table(matrix, grid: StrategyGrid, name: str = "table") -> PayoffKernel:
    return PayoffKernel(grid, np.asarray(matrix, dtype=float), name, {})


def kernel_from_csv(path, grid: StrategyGrid) -> PayoffKernel:
    """Load a table kernel; row i holds the payoffs of s_i against each s_j."""
    with open(path, newline="") as fh:
        rows = [[float(c) for c in row] for row in csv.reader(fh) if row]
    return PayoffKernel(grid, np.asarray(rows, dtype=float), "table", {"path": str(path)})


def evaluate_payoffs(kernel: PayoffKernel, mu: DiscreteMeasure) -> PayoffVector:
    """Mean payoff function F(mu) sampled on the grid."""
    require_same_grid(kernel.grid, mu.grid)
    return PayoffVector(kernel.grid, kernel.matrix @ mu.weights)


def bilinear_form(kernel: PayoffKernel, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """<F(b), a> = sum_ij A[i][j] a_i b_j."""
    require_same_grid(kernel.grid, a.grid)
    require_same_grid(kernel.grid, b.grid)
    return float(a.weights @ (kernel.matrix @ b.weights))


def continuous_war_bilinear_oracle(V: float, mu: DiscreteMeasure,
                                   nu: DiscreteMeasure) -> float:
    """Closed-form monotonicity certificate for the continuous war.

    Evaluates -integral over t of (mu([t, T]) - nu([t, T]))^2 dt, which
    equals the bilinear form on mu - nu for any symmetric theta and any V:
    the theta part of the kernel cancels on zero-mass differences, leaving
    the -min(s, s') part, whose quadratic form is this tail integral. Tails
    are step functions on grid cells, so the integral is a finite sum.
    """
    require_same_grid(mu.grid, nu.grid)
    if mu.kind != PROBABILITY or nu.kind != PROBABILITY:
        raise ValueError("oracle expects probability measures")
    d = mu.weights - nu.weights
    # tail after cell k: sum of d over indices > k, constant on (s_k, s_{k+1}]
    tails = np.cumsum(d[::-1])[::-1]
    gaps = np.diff(mu.grid.points)
    return -float(np.dot(tails[1:] ** 2, gaps))


@dataclass(frozen=True)
class MonotonicityReport:
    max_value: float
    monotone: bool
    violating_pair: Optional[tuple] = None  # (mu, nu) achieving max_value


def monotonicity_test(kernel: PayoffKernel, trials: int, seed: int) -> MonotonicityReport:
    """Sample pairs of states and evaluate <F(mu) - F(nu), mu - nu>.

    The game is reported monotone when the maximum over all sampled pairs
    stays below 1e-9; a positive maximum comes with the witnessing pair.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = kernel.grid.n
    best = -np.inf
    witness = None
    for _ in range(trials):
        wm = -np.log1p(-rng.random(n))
        wn = -np.log1p(-rng.random(n))
        mu = DiscreteMeasure(kernel.grid, wm / wm.sum(), PROBABILITY)
        nu = DiscreteMeasure(kernel.grid, wn / wn.sum(), PROBABILITY)
        d = mu.weights - nu.weights
        val = float(d @ (kernel.matrix @ d))
        if val > best:
            best = val
            witness = (mu, nu)
    monotone = best <= MONOTONE_TOL
    return MonotonicityReport(best, monotone, None if monotone else witness)


def war_nash_equilibrium(V: float, grid: StrategyGrid) -> DiscreteMeasure:
    """Discretized Nash equilibrium of the war of attrition.

    The closed-form CDF is 1 - exp(-s/V) on [0, s*), flat on [s*, T), and
    jumps to 1 at T, with s* = T - V/2. Cell mass is binned to the right
    grid endpoint (BINNING_CONVENTION), so the T-atom exp(-s*/V) sits
    exactly on the last grid point.
    """
    if V <= 0:
        raise ValueError("war of attrition needs V > 0")
    T = grid.upper
    if T <= V / 2:
        raise ValueError("war of attrition needs T > V/2")
    s_star = T - V / 2

    def cdf_closed_form(s):
        out = np.where(s < s_star, -np.expm1(-np.asarray(s, dtype=float) / V),
                       -np.expm1(-s_star / V))
        return np.where(np.asarray(s) >= T, 1.0, out)

    vals = cdf_closed_form(grid.points)
    w = np.empty(grid.n)
    w[0] = vals[0]
    w[1:] = np.diff(vals)
    return DiscreteMeasure(grid, w, PROBABILITY)
