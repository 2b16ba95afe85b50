"""Grid-refinement convergence studies and choice-paralysis diagnostics.

The continuum dynamics are never solved directly; the check is a Cauchy
one: simulate the same problem on successively finer grids, embed each
pair of trajectories on the union grid (which only inserts zero-weight
points, leaving the BL norm unchanged), and track the sup-over-time
bounded-Lipschitz distance between consecutive refinements.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from evodyn.dynamics import RevisionProtocol, Trajectory, simulate_edm
from evodyn.games import evaluate_payoffs
from evodyn.measures import DiscreteMeasure, bl_norm, random_measure
from evodyn.strategy_space import (
    StrategyGrid,
    make_uniform_grid,
    make_uniform_reference,
)


@dataclass(frozen=True)
class RegularityConstants:
    """Protocol bound M, Lipschitz constants L1-L3, and the derived rate K.

    K = max{2 L3 + 3 max{L1, M}, 3 max{L2, M}} is the exponential rate in
    the refinement error bound.
    """

    M: float
    L1: float
    L2: float
    L3: float
    K: float = field(init=False)

    def __post_init__(self):
        for name in ("M", "L1", "L2", "L3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        k = max(2.0 * self.L3 + 3.0 * max(self.L1, self.M),
                3.0 * max(self.L2, self.M))
        object.__setattr__(self, "K", k)


def gronwall_bound(consts: RegularityConstants, d_lambda: float, d_mu0: float,
                   t: float) -> float:
    """Refinement error bound -d_lambda + (d_lambda + d_mu0) e^{K t}."""
    if d_lambda < 0 or d_mu0 < 0 or t < 0:
        raise ValueError("bound inputs must be nonnegative")
    return -d_lambda + (d_lambda + d_mu0) * float(np.exp(consts.K * t))


def protocol_bound_estimate(protocol: RevisionProtocol, kernel, samples: int,
                            seed: int) -> float:
    """Max closed-loop switch rate over sampled states: a lower bound on M."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    best = 0.0
    for k in range(samples):
        mu = random_measure(kernel.grid, seed + k)
        rho = evaluate_payoffs(kernel, mu).values
        if protocol.kind == "bnn":
            rate = float(np.max(np.maximum(rho - np.dot(rho, mu.weights), 0.0)))
        else:
            rate = float(np.max(np.asarray(
                protocol.phi(rho[:, None] - rho[None, :]), dtype=float)))
        best = max(best, rate)
    return best


def union_grid(a: StrategyGrid, b: StrategyGrid) -> StrategyGrid:
    if a.lower != b.lower or a.upper != b.upper:
        raise ValueError("grids must share endpoints")
    return StrategyGrid(a.lower, a.upper, np.union1d(a.points, b.points))


def embed(mu: DiscreteMeasure, target: StrategyGrid) -> DiscreteMeasure:
    """Re-express a measure on a finer grid containing all its points."""
    pos = np.searchsorted(target.points, mu.grid.points)
    if np.any(pos >= target.n) or np.any(target.points[pos] != mu.grid.points):
        raise ValueError("target grid must contain every source point")
    w = np.zeros(target.n)
    w[pos] = mu.weights
    return DiscreteMeasure(target, w, mu.kind)


@dataclass(frozen=True)
class RefineRow:
    n_coarse: int
    n_fine: int
    sup_bl: float
    t_of_max: float


@dataclass(frozen=True)
class RefineReport:
    rows: List[RefineRow]
    times: np.ndarray

    def sup_bl_sequence(self):
        return [row.sup_bl for row in self.rows]


def write_refine_csv(report: RefineReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_coarse", "n_fine", "sup_bl", "t_of_max"])
        for row in report.rows:
            writer.writerow([row.n_coarse, row.n_fine,
                             format(row.sup_bl, ".17g"),
                             format(row.t_of_max, ".17g")])


def refine_study(kernel_family: Callable, protocol: RevisionProtocol,
                 ns: Sequence[int], x0_family: Callable, t_end: float, dt: float,
                 horizon_samples: int = 50, *, lower: float, upper: float,
                 reference_family: Optional[Callable] = None,
                 method: str = "rk4", jobs: int = 1) -> RefineReport:
    """Cauchy refinement study over a list of grid sizes.

    ``kernel_family`` and ``x0_family`` build the kernel and initial state
    on each grid (the same continuum data discretized per grid), so the
    trajectories are comparable after union-grid embedding.
    """
    if len(ns) < 2:
        raise ValueError("need at least two grid sizes")
    if reference_family is None:
        reference_family = make_uniform_reference
    n_steps = int(round(t_end / dt))
    sample_every = max(1, n_steps // max(1, horizon_samples))

    def run(n):
        grid = make_uniform_grid(n, lower, upper)
        kernel = kernel_family(grid)
        x0 = x0_family(grid)
        lam = reference_family(grid)
        return simulate_edm(kernel, protocol, lam, x0, t_end, dt,
                            sample_every=sample_every, method=method)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trajectories = list(pool.map(run, ns))
    else:
        trajectories = [run(n) for n in ns]

    times = trajectories[0].times
    for tr in trajectories[1:]:
        if not np.allclose(tr.times, times):
            raise ValueError("refinement runs produced different sample times")

    rows = []
    for (n_c, tr_c), (n_f, tr_f) in zip(zip(ns, trajectories),
                                        zip(ns[1:], trajectories[1:])):
        grid_u = union_grid(tr_c.grid, tr_f.grid)
        sup_bl, t_of_max = 0.0, float(times[0])
        for t, xc, xf in zip(times, tr_c.states, tr_f.states):
            diff = embed(xc, grid_u) - embed(xf, grid_u)
            val = bl_norm(diff)
            if val > sup_bl:
                sup_bl, t_of_max = val, float(t)
        rows.append(RefineRow(int(n_c), int(n_f), sup_bl, t_of_max))
    return RefineReport(rows, times)


@dataclass(frozen=True)
class ChoiceMobilityReport:
    times: np.ndarray
    c: np.ndarray  # c(t) = sup over runs of l1 distance to the limit state
    verdict: str
    threshold: float


def choice_mobility_trace(trajectories: Sequence[Trajectory],
                          limits: Sequence[DiscreteMeasure],
                          threshold: float = 1e-2) -> ChoiceMobilityReport:
    """Track sup_n ||x_n(t) - limit_n||_1 over shared sample times.

    An empirical probe of uniform-in-n convergence: if the curve never
    drops, the family is suspected of choice paralysis (e.g. switch rates
    that decay with n freeze every trajectory near its start).
    """
    if len(trajectories) != len(limits) or not trajectories:
        raise ValueError("need one limit state per trajectory")
    times = trajectories[0].times
    for tr in trajectories[1:]:
        if len(tr.times) != len(times) or not np.allclose(tr.times, times):
            raise ValueError("trajectories must share sample times")
    c = np.zeros(len(times))
    for tr, limit in zip(trajectories, limits):
        if not (limit.grid is tr.grid or np.array_equal(limit.grid.points,
                                                        tr.grid.points)):
            raise ValueError("limit state must live on its trajectory's grid")
        for k, x in enumerate(tr.states):
            c[k] = max(c[k], float(np.abs(x.weights - limit.weights).sum()))
    verdict = ("choice-mobile (empirically)" if c[-1] < threshold
               else "paralysis suspected")
    return ChoiceMobilityReport(times, c, verdict, threshold)
