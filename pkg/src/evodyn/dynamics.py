"""Revision protocols, mean-field evaluation, and time integration.

The finite mean dynamic is

    xdot_i = lam_i sum_j rate(j -> i) x_j - x_i sum_j rate(i -> j) lam_j,

where the rate slot depends on the protocol: BNN uses the excess payoff of
the target strategy max{0, rho_i - <rho, x>} (independent of the source),
Smith uses the positive payoff difference max{0, rho_i - rho_j}, and an
impartial pairwise protocol applies a user rate function phi to the payoff
difference. Integration is fixed-step explicit Euler or RK4 with the
feedback payoff recomputed at every stage, followed by a mass guard that
clamps sub-tolerance negative weights and renormalizes drift.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from evodyn import _core
from evodyn.games import PayoffKernel
from evodyn.measures import (
    PROBABILITY,
    SIGNED,
    DiscreteMeasure,
    PayoffVector,
)
from evodyn.strategy_space import ReferenceMeasure, require_same_grid

NEG_WEIGHT_TOL = 1e-12
RENORM_TOL = 1e-12


class MassGuardError(RuntimeError):
    """A step produced weights too negative to be numerical drift."""


class FieldNumericsError(RuntimeError):
    """The vector field evaluated to NaN or infinity."""


@dataclass(frozen=True, eq=False)
class RevisionProtocol:
    """Switch-rate rule. kind is "bnn", "smith", or "impartial".

    ``phi`` maps an array of payoff differences to nonnegative rates
    (pairwise kinds only). ``tau`` is the running integral of phi and is
    what the pairwise storage function needs; it is supplied analytically
    or not at all.
    """

    kind: str
    phi: Optional[Callable] = None
    tau: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("bnn", "smith", "impartial"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.kind == "impartial" and self.phi is None:
            raise ValueError("impartial protocol needs a rate function phi")

    @property
    def is_pairwise(self) -> bool:
        return self.kind in ("smith", "impartial")

    @property
    def has_storage(self) -> bool:
        return self.kind == "bnn" or self.tau is not None


def _smith_phi(r):
    return np.maximum(r, 0.0)


def _smith_tau(r):
    return 0.5 * np.maximum(r, 0.0) ** 2


def bnn() -> RevisionProtocol:
    return RevisionProtocol("bnn")


def smith() -> RevisionProtocol:
    return RevisionProtocol("smith", phi=_smith_phi, tau=_smith_tau)


def impartial_pc(phi: Callable, tau: Optional[Callable] = None) -> RevisionProtocol:
    return RevisionProtocol("impartial", phi=phi, tau=tau)


@dataclass(frozen=True)
class SmoothingConfig:
    """First-order payoff smoothing rhodot = lambda_s (F(mu) - rho)."""

    lambda_s: float

    def __post_init__(self):
        if self.lambda_s <= 0:
            raise ValueError("smoothing rate lambda_s must be positive")


@dataclass(eq=False)
class Trajectory:
    """Sampled run: states, feedback payoffs, and per-sample diagnostics.

    nash_gap is always measured against the static game payoff F(mu(t));
    storage and sigma are evaluated at the feedback pair (mu(t), rho(t)).
    mass_error is the largest |total mass - 1| seen before renormalization
    since the previous sample.
    """

    times: np.ndarray
    states: List[DiscreteMeasure]
    payoffs: List[PayoffVector]
    nash_gap: np.ndarray
    storage: np.ndarray
    sigma: np.ndarray
    mass_error: np.ndarray

    def __post_init__(self):
        k = len(self.times)
        if not (len(self.states) == len(self.payoffs) == k
                == len(self.nash_gap) == len(self.storage)
                == len(self.sigma) == len(self.mass_error)):
            raise ValueError("trajectory columns must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def grid(self):
        return self.states[0].grid


def _protocol_field(protocol, x, rho, lam):
    return _core.field_eval(protocol.kind, protocol.phi, x, rho, lam)


def mean_field(protocol: RevisionProtocol, x: DiscreteMeasure, rho: PayoffVector,
               lambda_ref: ReferenceMeasure) -> DiscreteMeasure:
    """Mean-dynamics vector field; a tangent (zero total mass) measure."""
    require_same_grid(x.grid, rho.grid)
    require_same_grid(x.grid, lambda_ref.grid)
    v = _protocol_field(protocol, x.weights, rho.values, lambda_ref.weights)
    return DiscreteMeasure(x.grid, v, SIGNED)


def sign_preservation_check(protocol: RevisionProtocol, trials: int, seed: int) -> bool:
    """Does sign(rate(i -> j)) == sign(max{0, rho_j - rho_i}) on samples?

    Only meaningful for pairwise protocols, where a rate between a concrete
    strategy pair exists; the BNN rate is a property of the target alone.
    """
    if not protocol.is_pairwise:
        raise ValueError("sign preservation is a pairwise-protocol property")
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(trials):
        diff = rng.uniform(-5.0, 5.0)
        rate = float(np.asarray(protocol.phi(np.array(diff))))
        want_positive = diff > 0
        if want_positive != (rate > 0) or rate < 0:
            return False
    return True


def _mass_guard(w):
    """Clamp tiny negatives, renormalize drift; returns (w, pre-guard error)."""
    if not np.all(np.isfinite(w)):
        raise FieldNumericsError("non-finite state after step")
    if np.any(w < -NEG_WEIGHT_TOL):
        raise MassGuardError(
            "negative weight beyond tolerance after step (dt too large?)")
    w = np.maximum(w, 0.0)
    total = w.sum()
    err = abs(total - 1.0)
    if err > RENORM_TOL:
        w = w / total
    return w, err


def _advance(rhs, y, dt, method):
    if method == "euler":
        return y + dt * rhs(y)
    if method == "rk4":
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    raise ValueError(f"unknown method {method!r}; use 'euler' or 'rk4'")


def step(protocol: RevisionProtocol, x: DiscreteMeasure, rho_provider: Callable,
         lambda_ref: ReferenceMeasure, dt: float, method: str = "rk4") -> DiscreteMeasure:
    """One explicit step of xdot = mean_field(x, rho_provider(x)).

    ``rho_provider`` maps a (possibly off-simplex stage) state to its
    PayoffVector and is re-invoked at every stage. The mass guard runs on
    the result.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    lam = lambda_ref.weights
    grid = x.grid

    def rhs(w):
        rho = rho_provider(DiscreteMeasure(grid, w, SIGNED))
        require_same_grid(grid, rho.grid)
        return _protocol_field(protocol, w, rho.values, lam)

    w, _ = _mass_guard(_advance(rhs, x.weights, dt, method))
    return DiscreteMeasure(grid, w, PROBABILITY)


def _storage_sigma(protocol, x, rho, lam):
    if protocol.kind == "bnn":
        return _core.bnn_storage(x, rho, lam), _core.bnn_sigma(x, rho, lam)
    if protocol.tau is not None:
        s = _core.pc_storage_lin(x, rho, lam, protocol.tau)
        return s, _core.pc_sigma(x, rho, lam, protocol.phi, protocol.tau)
    return math.nan, math.nan


def _n_steps(t_end, dt):
    n = int(round(t_end / dt))
    if n < 1 or t_end <= 0:
        raise ValueError("t_end must cover at least one step")
    return n


def simulate_edm(kernel: PayoffKernel, protocol: RevisionProtocol,
                 lambda_ref: ReferenceMeasure, x0: DiscreteMeasure,
                 t_end: float, dt: float, sample_every: int = 1,
                 method: str = "rk4") -> Trajectory:
    """Integrate the closed loop xdot = v(x, F(x)) and sample diagnostics."""
    require_same_grid(kernel.grid, x0.grid)
    require_same_grid(kernel.grid, lambda_ref.grid)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    a = kernel.matrix
    lam = lambda_ref.weights
    grid = kernel.grid

    def rhs(w):
        return _protocol_field(protocol, w, a @ w, lam)

    n_steps = _n_steps(t_end, dt)
    times, states, payoffs = [], [], []
    gaps, storages, sigmas, mass_errors = [], [], [], []

    w = x0.weights.copy()
    pending_mass_err = abs(w.sum() - 1.0)

    def record(k, w, err):
        rho = a @ w
        times.append(k * dt)
        states.append(DiscreteMeasure(grid, w, PROBABILITY))
        payoffs.append(PayoffVector(grid, rho))
        gaps.append(float(rho.max() - np.dot(rho, w)))
        s, sig = _storage_sigma(protocol, w, rho, lam)
        storages.append(s)
        sigmas.append(sig)
        mass_errors.append(err)

    record(0, w, pending_mass_err)
    pending_mass_err = 0.0
    for k in range(1, n_steps + 1):
        w, err = _mass_guard(_advance(rhs, w, dt, method))
        pending_mass_err = max(pending_mass_err, err)
        if k % sample_every == 0 or k == n_steps:
            record(k, w, pending_mass_err)
            pending_mass_err = 0.0

    return Trajectory(np.asarray(times), states, payoffs, np.asarray(gaps),
                      np.asarray(storages), np.asarray(sigmas),
                      np.asarray(mass_errors))


def simulate_dpedm(kernel: PayoffKernel, protocol: RevisionProtocol,
                   lambda_ref: ReferenceMeasure, smoothing: SmoothingConfig,
                   x0: DiscreteMeasure, rho0: PayoffVector,
                   t_end: float, dt: float, sample_every: int = 1,
                   method: str = "rk4") -> Trajectory:
    """Integrate the coupled state/payoff system with smoothed feedback.

    xdot = v(x, rho), rhodot = lambda_s (F(x) - rho). The recorded payoffs
    are the dynamic rho(t); nash_gap still measures x(t) against F(x(t)).
    """
    require_same_grid(kernel.grid, x0.grid)
    require_same_grid(kernel.grid, rho0.grid)
    require_same_grid(kernel.grid, lambda_ref.grid)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    a = kernel.matrix
    lam = lambda_ref.weights
    lam_s = smoothing.lambda_s
    grid = kernel.grid
    n = grid.n

    def rhs(y):
        w, rho = y[:n], y[n:]
        vx = _protocol_field(protocol, w, rho, lam)
        vrho = lam_s * (a @ w - rho)
        return np.concatenate([vx, vrho])

    n_steps = _n_steps(t_end, dt)
    times, states, payoffs = [], [], []
    gaps, storages, sigmas, mass_errors = [], [], [], []

    y = np.concatenate([x0.weights, rho0.values])
    pending_mass_err = abs(x0.weights.sum() - 1.0)

    def record(k, y, err):
        w, rho = y[:n], y[n:]
        game_rho = a @ w
        times.append(k * dt)
        states.append(DiscreteMeasure(grid, w, PROBABILITY))
        payoffs.append(PayoffVector(grid, rho.copy()))
        gaps.append(float(game_rho.max() - np.dot(game_rho, w)))
        s, sig = _storage_sigma(protocol, w, rho, lam)
        storages.append(s)
        sigmas.append(sig)
        mass_errors.append(err)

    record(0, y, pending_mass_err)
    pending_mass_err = 0.0
    for k in range(1, n_steps + 1):
        y = _advance(rhs, y, dt, method)
        if not np.all(np.isfinite(y)):
            raise FieldNumericsError("non-finite state after step")
        w, err = _mass_guard(y[:n])
        y[:n] = w
        pending_mass_err = max(pending_mass_err, err)
        if k % sample_every == 0 or k == n_steps:
            record(k, y, pending_mass_err)
            pending_mass_err = 0.0

    return Trajectory(np.asarray(times), states, payoffs, np.asarray(gaps),
                      np.asarray(storages), np.asarray(sigmas),
                      np.asarray(mass_errors))
