"""Strategy sets: discretized compact intervals and reference measures.

The strategy set is a compact interval S = [lower, upper] with metric
|s - s'|, discretized to a finite grid that always contains both endpoints.
A reference measure assigns a strictly positive revision weight to every
grid point; it plays the role of the full-support measure that scales the
inflow term of every mean dynamic.
"""

from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StrategyGrid:
    """Sorted discretization of [lower, upper], endpoints included."""

    lower: float
    upper: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs a non-empty 1-D point array")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] != self.lower or pts[-1] != self.upper:
            raise ValueError("grid must include both endpoints")

    @property
    def n(self) -> int:
        return self.points.size

    def distance(self, i: int, j: int) -> float:
        return abs(float(self.points[i] - self.points[j]))


def grids_match(a: StrategyGrid, b: StrategyGrid) -> bool:
    return a is b or (a.n == b.n and bool(np.array_equal(a.points, b.points)))


def require_same_grid(a: StrategyGrid, b: StrategyGrid) -> None:
    if not grids_match(a, b):
        raise ValueError("grid mismatch")


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Full-support probability weights over a grid (revision rates).

    ``renormalization`` records the factor the input weights were divided
    by to reach total mass 1.
    """

    grid: StrategyGrid
    weights: np.ndarray
    renormalization: float = field(default=1.0)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.grid.n,):
            raise ValueError("weights length must match grid")
        if np.any(w <= 0):
            raise ValueError("reference measure must have full support")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError("reference weights must sum to 1")


def make_uniform_grid(n: int, lower: float, upper: float) -> StrategyGrid:
    """n equally spaced strategies covering [lower, upper]."""
    if n < 2:
        raise ValueError("need at least 2 grid points")
    if not lower < upper:
        raise ValueError("need lower < upper")
    return StrategyGrid(float(lower), float(upper), np.linspace(lower, upper, n))


def make_uniform_reference(grid: StrategyGrid) -> ReferenceMeasure:
    """Uniform reference weights 1/n at every grid point."""
    n = grid.n
    return ReferenceMeasure(grid, np.full(n, 1.0 / n))


def make_reference(grid: StrategyGrid, weights) -> ReferenceMeasure:
    """Normalize strictly positive weights into a reference measure."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (grid.n,):
        raise ValueError("weights length must match grid")
    if np.any(w <= 0):
        raise ValueError("reference measure must have full support")
    total = float(w.sum())
    return ReferenceMeasure(grid, w / total, renormalization=total)
