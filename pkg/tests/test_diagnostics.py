"""Nash verdicts, storage/dissipation closed forms, and trajectory audits."""

import numpy as np
import pytest

from evodyn.diagnostics import (
    DissipativityReport,
    bnn_storage,
    closed_loop_supply,
    dissipation_rate,
    dissipativity_report,
    nash_check,
    nash_gap,
    pc_storage,
    rest_point_check,
    score_function,
    storage,
    storage_directional_derivative,
    storage_trace_check,
    supply_rate,
)
from evodyn.dynamics import (
    SmoothingConfig,
    bnn,
    impartial_pc,
    mean_field,
    simulate_dpedm,
    simulate_edm,
    smith,
)
from evodyn.games import (
    evaluate_payoffs,
    kernel_continuous_war,
    kernel_cosine,
    kernel_from_table,
    theta_logistic,
)
from evodyn.measures import (
    SIGNED,
    DiscreteMeasure,
    PayoffVector,
    dirac,
    gaussian_on_grid,
    pairing,
    random_measure,
    tv_norm,
    uniform_measure,
)
from evodyn.strategy_space import make_uniform_grid, make_uniform_reference


@pytest.fixture
def grid9():
    # points 0, 0.25, ..., 2: contains the cosine equilibria {0, 1, 2}
    return make_uniform_grid(9, 0.0, 2.0)


def two_point(x, rho):
    g = make_uniform_grid(2, 0.0, 1.0)
    return (DiscreteMeasure(g, np.asarray(x, dtype=float)),
            PayoffVector(g, np.asarray(rho, dtype=float)),
            make_uniform_reference(g))


def cube_plus(r):
    return np.maximum(r, 0.0) ** 2


def cube_plus_tau(r):
    return np.maximum(r, 0.0) ** 3 / 3.0


def mix(g, indices, weights):
    w = np.zeros(g.n)
    w[list(indices)] = weights
    return DiscreteMeasure(g, w)


def test_nash_gap_examples(grid9):
    k = kernel_cosine(grid9)
    three = mix(grid9, [0, 4, 8], [1 / 3, 1 / 3, 1 / 3])
    assert nash_gap(three, evaluate_payoffs(k, three)) <= 1e-12

    half = dirac(grid9, 2)  # s = 0.5
    rho = evaluate_payoffs(k, half)
    assert abs(nash_gap(half, rho) - 2.0) <= 1e-12

    const = PayoffVector(grid9, np.full(9, -3.0))
    assert nash_gap(random_measure(grid9, 0), const) <= 1e-12


def test_nash_check_examples(grid9):
    k = kernel_cosine(grid9)
    good = mix(grid9, [0, 8], [0.5, 0.5])
    assert nash_check(good, evaluate_payoffs(k, good), tol=1e-10).ok

    uni = uniform_measure(grid9)
    res = nash_check(uni, evaluate_payoffs(k, uni), tol=1e-10)
    assert not res.ok
    assert res.worst_s == 0  # s = 0 maximizes cos(2 pi s)
    assert res.worst_support in (2, 6)  # payoff minima at s = 0.5, 1.5
    assert abs(res.amount - 2.0) <= 1e-12

    const = PayoffVector(grid9, np.zeros(9))
    assert nash_check(uni, const, tol=0.0).ok
    with pytest.raises(ValueError):
        nash_check(uni, const, tol=-1.0)


def test_bnn_storage_hand_value():
    mu, rho, lam = two_point([0.5, 0.5], [1.0, 0.0])
    assert abs(bnn_storage(mu, rho, lam) - 0.0625) <= 1e-15
    const = PayoffVector(mu.grid, np.full(2, 5.0))
    assert bnn_storage(mu, const, lam) <= 1e-30


def test_pc_storage_hand_value():
    mu, rho, lam = two_point([1.0, 0.0], [0.0, 1.0])
    assert abs(pc_storage(mu, rho, lam, smith().tau) - 0.25) <= 1e-15
    const = PayoffVector(mu.grid, np.full(2, 5.0))
    assert pc_storage(mu, const, lam, smith().tau) == 0.0
    with pytest.raises(ValueError):
        pc_storage(mu, rho, lam, None)


def test_storage_nonnegative_on_random_inputs():
    g = make_uniform_grid(11, 0.0, 1.0)
    lam = make_uniform_reference(g)
    rng = np.random.Generator(np.random.PCG64(3))
    for seed in range(100):
        mu = random_measure(g, seed)
        rho = PayoffVector(g, rng.normal(size=11))
        assert bnn_storage(mu, rho, lam) >= 0.0
        assert pc_storage(mu, rho, lam, smith().tau) >= 0.0


def test_dissipation_rate_hand_values():
    mu, rho, lam = two_point([0.5, 0.5], [1.0, 0.0])
    assert abs(dissipation_rate(bnn(), mu, rho, lam) - 0.03125) <= 1e-15
    mu2, rho2, lam2 = two_point([1.0, 0.0], [0.0, 1.0])
    assert abs(dissipation_rate(smith(), mu2, rho2, lam2) - 0.125) <= 1e-15
    const = PayoffVector(mu.grid, np.full(2, 5.0))
    assert dissipation_rate(bnn(), mu, const, lam) <= 1e-30
    assert dissipation_rate(smith(), mu, const, lam) == 0.0
    with pytest.raises(ValueError):
        dissipation_rate(impartial_pc(cube_plus), mu, rho, lam)  # no tau


def test_supply_rate_examples():
    g = make_uniform_grid(2, 0.0, 1.0)
    zero = DiscreteMeasure(g, np.zeros(2), SIGNED)
    eta = PayoffVector(g, np.array([1.0, 0.0]))
    assert supply_rate(zero, eta) == 0.0
    tangent = DiscreteMeasure(g, np.array([0.5, -0.5]), SIGNED)
    const = PayoffVector(g, np.full(2, 7.0))
    assert abs(supply_rate(tangent, const)) <= 1e-12
    assert supply_rate(tangent, eta) == 0.5


def test_closed_loop_supply_examples(grid9):
    cos = kernel_cosine(grid9)
    cts = kernel_continuous_war(1.0, theta_logistic(100.0), grid9)
    for seed in range(20):
        v = random_measure(grid9, seed) - random_measure(grid9, seed + 30)
        assert abs(closed_loop_supply(cos, v)) <= 1e-12
        assert closed_loop_supply(cts, v) <= 1e-12
    g2 = make_uniform_grid(2, 0.0, 1.0)
    ident = kernel_from_table(np.eye(2), g2)
    v = DiscreteMeasure(g2, np.array([0.5, -0.5]), SIGNED)
    assert closed_loop_supply(ident, v) == 0.5


def test_storage_trace_on_monotone_benchmarks():
    g = make_uniform_grid(60, 0.0, 2.0)
    lam = make_uniform_reference(g)
    cts = kernel_continuous_war(1.0, theta_logistic(100.0), g)
    tr = simulate_edm(cts, bnn(), lam, gaussian_on_grid(g, 1.0, 0.1),
                      10.0, 0.01, sample_every=10)
    rep = storage_trace_check(tr, bnn(), cts, lam)
    assert rep.max_increase <= 1e-6
    assert rep.energy_balance_residual <= 1e-3

    cos = kernel_cosine(g)
    tr2 = simulate_edm(cos, smith(), lam, uniform_measure(g),
                       10.0, 0.01, sample_every=10)
    rep2 = storage_trace_check(tr2, smith(), cos, lam)
    assert rep2.max_increase <= 1e-6
    assert rep2.energy_balance_residual <= 1e-3


def test_storage_trace_stationary_run(grid9):
    k = kernel_cosine(grid9)
    lam = make_uniform_reference(grid9)
    x0 = mix(grid9, [0, 8], [0.5, 0.5])
    tr = simulate_edm(k, bnn(), lam, x0, 1.0, 0.01, sample_every=10)
    rep = storage_trace_check(tr, bnn(), k, lam)
    assert rep.max_increase <= 1e-15
    assert rep.energy_balance_residual <= 1e-15


def test_storage_trace_input_guards(grid9):
    lam = make_uniform_reference(grid9)
    ident = kernel_from_table(np.eye(9), grid9)
    tr = simulate_edm(ident, bnn(), lam, uniform_measure(grid9), 1.0, 0.01,
                      sample_every=10)
    with pytest.raises(ValueError):
        storage_trace_check(tr, bnn(), ident, lam)

    k = kernel_cosine(grid9)
    x0 = gaussian_on_grid(grid9, 1.0, 0.1)
    smoothed = simulate_dpedm(k, bnn(), lam, SmoothingConfig(0.5), x0,
                              evaluate_payoffs(k, x0), 5.0, 0.01, sample_every=10)
    with pytest.raises(ValueError):
        storage_trace_check(smoothed, bnn(), k, lam)


def test_rest_point_check_examples(grid9):
    k = kernel_cosine(grid9)
    lam = make_uniform_reference(grid9)
    rep = rest_point_check(mix(grid9, [0, 8], [0.5, 0.5]), k, bnn(), lam, tol=1e-10)
    assert rep.is_rest and rep.nash_ok and rep.gap <= 1e-12

    rep2 = rest_point_check(uniform_measure(grid9), k, bnn(), lam, tol=1e-10)
    assert not rep2.is_rest and not rep2.nash_ok and rep2.field_tv > 1e-3

    zero = kernel_from_table(np.zeros((9, 9)), grid9)
    rep3 = rest_point_check(random_measure(grid9, 4), zero, smith(), lam, tol=1e-10)
    assert rep3.is_rest and rep3.nash_ok

    with pytest.raises(ValueError):
        rest_point_check(uniform_measure(grid9), k, bnn(), lam, tol=-1.0)


def test_score_function_examples(grid9):
    k = kernel_cosine(grid9)
    mu = random_measure(grid9, 8)
    for eta in (0.01, 0.5, 1.0):
        assert score_function(k, mu, mu, eta) == 0.0
    d0, dhalf = dirac(grid9, 0), dirac(grid9, 2)
    for eta in (0.01, 0.1, 0.5, 1.0):
        assert abs(score_function(k, dhalf, d0, eta) - (-2.0)) <= 1e-12
    with pytest.raises(ValueError):
        score_function(k, dhalf, d0, 0.0)
    with pytest.raises(ValueError):
        score_function(k, dhalf, d0, 1.5)


def test_score_function_small_eta_limit(grid9):
    # h is affine in eta, so h(eta) -> <F(mu), nu - mu> as eta -> 0
    k = kernel_continuous_war(1.0, theta_logistic(100.0), grid9)
    mu, nu = random_measure(grid9, 1), random_measure(grid9, 2)
    base = pairing(evaluate_payoffs(k, mu), nu - mu)
    assert abs(score_function(k, nu, mu, 1e-9) - base) <= 1e-7
    h1 = score_function(k, nu, mu, 0.25)
    h2 = score_function(k, nu, mu, 0.75)
    h3 = score_function(k, nu, mu, 1.0)
    slope = (h2 - h1) / 0.5
    assert abs(h3 - (h1 + 0.75 * slope)) <= 1e-12


def test_nash_formulations_agree(grid9):
    k = kernel_cosine(grid9)
    tol = 1e-6
    for seed in range(200):
        mu = random_measure(grid9, seed)
        rho = evaluate_payoffs(k, mu)
        assert nash_check(mu, rho, tol + 1e-12).ok == (nash_gap(mu, rho) <= tol)
    for weights in ([1.0, 0.0], [0.5, 0.5], [0.25, 0.75]):
        mu = mix(grid9, [0, 8], weights)
        rho = evaluate_payoffs(k, mu)
        assert nash_gap(mu, rho) <= 1e-12
        assert nash_check(mu, rho, 1e-12).ok


def test_nash_set_convex_for_cosine(grid9):
    k = kernel_cosine(grid9)
    corners = [dirac(grid9, 0), dirac(grid9, 4), dirac(grid9, 8)]
    rng = np.random.Generator(np.random.PCG64(10))
    for _ in range(50):
        c = rng.dirichlet(np.ones(3))
        w = sum(ci * m.weights for ci, m in zip(c, corners))
        mu = DiscreteMeasure(grid9, w)
        assert nash_check(mu, evaluate_payoffs(k, mu), 1e-10).ok


def test_pointwise_passivity_random_states():
    g = make_uniform_grid(13, 0.0, 1.0)
    lam = make_uniform_reference(g)
    rng = np.random.Generator(np.random.PCG64(17))
    for proto in (bnn(), smith()):
        for seed in range(200):
            mu = random_measure(g, seed)
            rho = PayoffVector(g, rng.normal(size=13))
            s = storage(proto, mu, rho, lam)
            sig = dissipation_rate(proto, mu, rho, lam)
            assert s >= 0.0 and sig >= 0.0
            ft = tv_norm(mean_field(proto, mu, rho, lam))
            if s <= 1e-12:
                assert ft <= 1e-10 and sig <= 1e-12
            if ft <= 1e-12:
                assert s <= 1e-10


def test_energy_identity_closed_forms():
    g = make_uniform_grid(10, 0.0, 2.0)
    lam = make_uniform_reference(g)
    rng = np.random.Generator(np.random.PCG64(23))
    protos = (bnn(), smith(), impartial_pc(cube_plus, cube_plus_tau))
    for seed in range(100):
        mu = random_measure(g, seed)
        rho = PayoffVector(g, rng.normal(size=10))
        eta = PayoffVector(g, rng.normal(size=10))
        for proto in protos:
            rep = dissipativity_report(proto, mu, rho, lam, eta)
            assert abs(rep.slack) <= 1e-9
            assert rep.storage >= 0.0 and rep.dissipation_sigma >= 0.0
            want = -rep.dissipation_sigma + rep.supply_w
            assert abs(rep.fd_derivative - want) <= 1e-9


def test_storage_derivative_matches_finite_difference():
    # cross-check the closed forms against a numerical derivative along the
    # actual coupled motion (x + h v, rho + h eta)
    g = make_uniform_grid(8, 0.0, 1.0)
    lam = make_uniform_reference(g)
    rng = np.random.Generator(np.random.PCG64(29))
    h = 1e-6
    for proto in (bnn(), smith()):
        for seed in range(20):
            mu = random_measure(g, seed)
            rho = PayoffVector(g, rng.normal(size=8))
            eta = PayoffVector(g, rng.normal(size=8))
            v = mean_field(proto, mu, rho, lam)
            d = storage_directional_derivative(proto, mu, rho, lam, eta)
            up = storage(proto,
                         DiscreteMeasure(g, mu.weights + h * v.weights, SIGNED),
                         PayoffVector(g, rho.values + h * eta.values), lam)
            dn = storage(proto,
                         DiscreteMeasure(g, mu.weights - h * v.weights, SIGNED),
                         PayoffVector(g, rho.values - h * eta.values), lam)
            assert abs((up - dn) / (2 * h) - d) <= 1e-6


def test_dissipativity_report_rejects_negative_storage():
    with pytest.raises(ValueError):
        DissipativityReport(-1.0, 0.0, 0.0, 0.0, 0.0)
