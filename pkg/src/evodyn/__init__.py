"""Evolutionary game dynamics on discretized continuum strategy sets.

Simulates mean dynamics (BNN, Smith, impartial pairwise comparison) for
linear kernel games on a discretized interval of strategies, and verifies
the game-theoretic properties that make those dynamics trustworthy:
Nash gaps, payoff monotonicity, Nash stationarity, storage-function
decrease, and grid-refinement convergence in the bounded-Lipschitz metric.
"""

from evodyn import approximation, diagnostics, dynamics, games, measures, strategy_space
from evodyn._core import kernel_backend

__version__ = "0.1.0"

__all__ = [
    "approximation",
    "diagnostics",
    "dynamics",
    "games",
    "kernel_backend",
    "measures",
    "strategy_space",
    "__version__",
]
