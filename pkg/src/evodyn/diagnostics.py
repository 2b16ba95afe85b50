"""Nash checks, storage/dissipation quantities, and trajectory verification.

The storage functions and their directional derivatives are evaluated from
closed forms, so the energy identity

    dS/dt along (field, eta) = -sigma + <eta, field>

holds to rounding error; finite differences appear only in the
trajectory-level check, where the slack is O(dt^2).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from evodyn import _core
from evodyn.dynamics import RevisionProtocol, Trajectory, mean_field
from evodyn.games import (
    PayoffKernel,
    bilinear_form,
    evaluate_payoffs,
    monotonicity_test,
)
from evodyn.measures import (
    DiscreteMeasure,
    PayoffVector,
    pairing,
    support,
    tv_norm,
)
from evodyn.strategy_space import ReferenceMeasure, require_same_grid

DEFAULT_SUPPORT_TOL = 1e-9


def nash_gap(mu: DiscreteMeasure, rho: PayoffVector) -> float:
    """Best single-strategy payoff minus the population-average payoff.

    Zero exactly at Nash states; positive otherwise (for probability mu).
    """
    require_same_grid(mu.grid, rho.grid)
    return float(rho.values.max() - np.dot(rho.values, mu.weights))


@dataclass(frozen=True)
class NashCheckResult:
    ok: bool
    worst_s: Optional[int] = None        # grid index of the profitable deviation
    worst_support: Optional[int] = None  # support index it beats
    amount: float = 0.0

    def __bool__(self):
        return self.ok


def nash_check(mu: DiscreteMeasure, rho: PayoffVector, tol: float,
               support_tol: float = DEFAULT_SUPPORT_TOL) -> NashCheckResult:
    """Support form of the Nash condition: rho(s) <= rho(s') on supp(mu).

    Reports the worst violating pair (s, s', amount) when it fails.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    require_same_grid(mu.grid, rho.grid)
    idx = support(mu, support_tol)
    if idx.size == 0:
        return NashCheckResult(True)
    vals = rho.values
    s_min = idx[np.argmin(vals[idx])]
    s_max = int(np.argmax(vals))
    amount = float(vals[s_max] - vals[s_min])
    if amount <= tol:
        return NashCheckResult(True)
    return NashCheckResult(False, s_max, int(s_min), amount)


def bnn_storage(mu: DiscreteMeasure, rho: PayoffVector,
                lambda_ref: ReferenceMeasure) -> float:
    """Half the lambda-weighted squared excess payoff."""
    require_same_grid(mu.grid, rho.grid)
    require_same_grid(mu.grid, lambda_ref.grid)
    return _core.bnn_storage(mu.weights, rho.values, lambda_ref.weights)


def pc_storage(mu: DiscreteMeasure, rho: PayoffVector,
               lambda_ref: ReferenceMeasure, tau) -> float:
    """Pairwise-comparison storage with analytic tau = integral of phi."""
    require_same_grid(mu.grid, rho.grid)
    require_same_grid(mu.grid, lambda_ref.grid)
    if tau is None:
        raise ValueError("pairwise storage needs the integral tau of phi")
    return _core.pc_storage_lin(mu.weights, rho.values, lambda_ref.weights, tau)


def storage(protocol: RevisionProtocol, mu: DiscreteMeasure, rho: PayoffVector,
            lambda_ref: ReferenceMeasure) -> float:
    """Protocol-appropriate storage value."""
    if protocol.kind == "bnn":
        return bnn_storage(mu, rho, lambda_ref)
    if protocol.is_pairwise:
        return pc_storage(mu, rho, lambda_ref, protocol.tau)
    raise ValueError(f"no storage function for protocol {protocol.kind!r}")


def dissipation_rate(protocol: RevisionProtocol, mu: DiscreteMeasure,
                     rho: PayoffVector, lambda_ref: ReferenceMeasure) -> float:
    """Strict dissipation term sigma >= 0; zero exactly at rest points."""
    require_same_grid(mu.grid, rho.grid)
    require_same_grid(mu.grid, lambda_ref.grid)
    x, r, lam = mu.weights, rho.values, lambda_ref.weights
    if protocol.kind == "bnn":
        return _core.bnn_sigma(x, r, lam)
    if protocol.is_pairwise:
        if protocol.tau is None:
            raise ValueError("pairwise dissipation needs the integral tau of phi")
        return _core.pc_sigma(x, r, lam, protocol.phi, protocol.tau)
    raise ValueError(f"no dissipation rate for protocol {protocol.kind!r}")


def supply_rate(nu: DiscreteMeasure, eta: PayoffVector) -> float:
    """Passivity supply rate w = <eta, nu> for a tangent direction nu."""
    return pairing(eta, nu)


def closed_loop_supply(kernel: PayoffKernel, v_field: DiscreteMeasure) -> float:
    """Supply along the closed loop: <F(v), v>, nonpositive for monotone games."""
    return bilinear_form(kernel, v_field, v_field)


def storage_directional_derivative(protocol: RevisionProtocol, mu: DiscreteMeasure,
                                   rho: PayoffVector, lambda_ref: ReferenceMeasure,
                                   eta: PayoffVector) -> float:
    """Closed-form derivative of the storage along (mean field, eta)."""
    require_same_grid(mu.grid, rho.grid)
    require_same_grid(mu.grid, lambda_ref.grid)
    require_same_grid(mu.grid, eta.grid)
    x, r, lam = mu.weights, rho.values, lambda_ref.weights
    if protocol.kind == "bnn":
        return _core.bnn_storage_derivative(x, r, lam, eta.values)
    if protocol.is_pairwise:
        if protocol.tau is None:
            raise ValueError("pairwise storage derivative needs tau")
        return _core.pc_storage_derivative(x, r, lam, protocol.phi, protocol.tau,
                                           eta.values)
    raise ValueError(f"no storage function for protocol {protocol.kind!r}")


@dataclass(frozen=True)
class DissipativityReport:
    """Pointwise passivity audit at one (mu, rho, eta)."""

    storage: float
    dissipation_sigma: float
    supply_w: float
    fd_derivative: float  # closed-form directional derivative of storage
    slack: float          # fd_derivative - (-sigma + supply)

    def __post_init__(self):
        if self.storage < -1e-12 or self.dissipation_sigma < -1e-12:
            raise ValueError("storage and sigma must be nonnegative")


def dissipativity_report(protocol: RevisionProtocol, mu: DiscreteMeasure,
                         rho: PayoffVector, lambda_ref: ReferenceMeasure,
                         eta: PayoffVector) -> DissipativityReport:
    """Evaluate storage, sigma, supply, and the energy-identity slack."""
    s = storage(protocol, mu, rho, lambda_ref)
    sig = dissipation_rate(protocol, mu, rho, lambda_ref)
    v = mean_field(protocol, mu, rho, lambda_ref)
    w = supply_rate(v, eta)
    deriv = storage_directional_derivative(protocol, mu, rho, lambda_ref, eta)
    return DissipativityReport(s, sig, w, deriv, deriv - (-sig + w))


@dataclass(frozen=True)
class StorageTraceReport:
    max_increase: float
    energy_balance_residual: float


def storage_trace_check(trajectory: Trajectory, protocol: RevisionProtocol,
                        kernel: PayoffKernel,
                        lambda_ref: ReferenceMeasure) -> StorageTraceReport:
    """Lyapunov audit of an EDM run under a monotone game.

    Checks that V(t) = storage(mu(t), F(mu(t))) never increases beyond
    integration slack, and that its centered finite difference matches
    -sigma + <F(v), v> at interior samples (O(dt^2) residual).
    """
    report = monotonicity_test(kernel, trials=200, seed=0)
    if not report.monotone:
        raise ValueError("storage_trace_check needs a monotone kernel")

    times = trajectory.times
    vals = np.empty(len(times))
    sigmas = np.empty(len(times))
    supplies = np.empty(len(times))
    for k, (x, rho) in enumerate(zip(trajectory.states, trajectory.payoffs)):
        if np.max(np.abs(kernel.matrix @ x.weights - rho.values)) > 1e-9:
            raise ValueError("trajectory payoffs are not static feedback F(mu)")
        vals[k] = storage(protocol, x, rho, lambda_ref)
        sigmas[k] = dissipation_rate(protocol, x, rho, lambda_ref)
        v = mean_field(protocol, x, rho, lambda_ref)
        supplies[k] = closed_loop_supply(kernel, v)

    max_increase = float(np.max(np.diff(vals))) if len(vals) > 1 else 0.0
    residual = 0.0
    for k in range(1, len(times) - 1):
        fd = (vals[k + 1] - vals[k - 1]) / (times[k + 1] - times[k - 1])
        residual = max(residual, abs(fd - (-sigmas[k] + supplies[k])))
    return StorageTraceReport(max_increase, float(residual))


@dataclass(frozen=True)
class RestPointReport:
    is_rest: bool
    field_tv: float
    nash_ok: bool
    gap: float

    def __bool__(self):
        return self.is_rest


def rest_point_check(mu: DiscreteMeasure, kernel: PayoffKernel,
                     protocol: RevisionProtocol, lambda_ref: ReferenceMeasure,
                     tol: float) -> RestPointReport:
    """Is mu a rest point of the closed loop, and does Nash agree?

    Nash stationarity says the two verdicts coincide; the report carries
    both so callers can assert the coupling at their own tolerance ratio.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    rho = evaluate_payoffs(kernel, mu)
    v = mean_field(protocol, mu, rho, lambda_ref)
    field_tv = tv_norm(v)
    gap = nash_gap(mu, rho)
    check = nash_check(mu, rho, tol=max(tol, DEFAULT_SUPPORT_TOL))
    return RestPointReport(field_tv <= tol, field_tv, bool(check), gap)


def score_function(kernel: PayoffKernel, nu: DiscreteMeasure, mu: DiscreteMeasure,
                   eta: float) -> float:
    """Mean-payoff advantage of nu over mu after an eta-mutation toward nu.

    h(eta) = E(nu, m) - E(mu, m) with m = (1 - eta) mu + eta nu. Negative
    for small eta exactly when mu resists invasion by nu.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    require_same_grid(nu.grid, mu.grid)
    mix = DiscreteMeasure(mu.grid, (1.0 - eta) * mu.weights + eta * nu.weights)
    rho_mix = evaluate_payoffs(kernel, mix)
    return pairing(rho_mix, nu - mu)
