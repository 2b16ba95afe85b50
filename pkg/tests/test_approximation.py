"""Refinement studies, the refinement error bound, and mobility probes."""

import math

import numpy as np
import pytest

from evodyn.approximation import (
    RegularityConstants,
    choice_mobility_trace,
    embed,
    gronwall_bound,
    protocol_bound_estimate,
    refine_study,
    union_grid,
    write_refine_csv,
)
from evodyn.dynamics import bnn, impartial_pc, mean_field, simulate_edm, smith
from evodyn.games import (
    kernel_continuous_war,
    kernel_cosine,
    kernel_from_table,
    theta_logistic,
)
from evodyn.measures import (
    SIGNED,
    DiscreteMeasure,
    bl_norm,
    dirac,
    gaussian_on_grid,
    random_measure,
    tv_norm,
)
from evodyn.strategy_space import make_uniform_grid, make_uniform_reference


def zero_kernel_family(grid):
    return kernel_from_table(np.zeros((grid.n, grid.n)), grid)


def cts_war_family(grid):
    return kernel_continuous_war(1.0, theta_logistic(100.0), grid)


def gauss_family(grid):
    return gaussian_on_grid(grid, 1.0, 0.1)


def test_regularity_constants_rate_formula():
    c = RegularityConstants(M=1.0, L1=2.0, L2=0.5, L3=1.5)
    assert c.K == max(2 * 1.5 + 3 * max(2.0, 1.0), 3 * max(0.5, 1.0))
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(50):
        m, l1, l2, l3 = rng.uniform(0, 5, size=4)
        c = RegularityConstants(m, l1, l2, l3)
        assert c.K == max(2 * l3 + 3 * max(l1, m), 3 * max(l2, m))
    with pytest.raises(ValueError):
        RegularityConstants(-1.0, 0.0, 0.0, 0.0)


def test_gronwall_bound_hand_cases():
    zero = RegularityConstants(0.0, 0.0, 0.0, 0.0)
    assert zero.K == 0.0
    for t in (0.0, 1.0, 10.0):
        assert gronwall_bound(zero, 0.0, 0.0, t) == 0.0
        assert abs(gronwall_bound(zero, 0.3, 0.2, t) - 0.5 + 0.3) <= 1e-12
    assert gronwall_bound(zero, 0.0, 0.25, 7.0) == 0.25

    unit = RegularityConstants(0.0, 0.0, 0.0, 0.5)  # K = 2*0.5 = 1
    assert unit.K == 1.0
    want = 0.1 * (math.e - 1.0)
    assert abs(gronwall_bound(unit, 0.1, 0.0, 1.0) - want) <= 1e-12

    with pytest.raises(ValueError):
        gronwall_bound(unit, -0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        gronwall_bound(unit, 0.0, 0.0, -1.0)


def test_gronwall_bound_monotone_in_each_argument():
    rng = np.random.Generator(np.random.PCG64(1))
    for _ in range(100):
        l3 = rng.uniform(0, 2)
        c_lo = RegularityConstants(0.0, 0.0, 0.0, l3)
        c_hi = RegularityConstants(0.0, 0.0, 0.0, l3 + rng.uniform(0, 1))
        dl, dm, t = rng.uniform(0, 1, size=3)
        base = gronwall_bound(c_lo, dl, dm, t)
        assert gronwall_bound(c_lo, dl, dm, t + 0.5) >= base
        assert gronwall_bound(c_hi, dl, dm, t) >= base
        assert gronwall_bound(c_lo, dl + 0.1, dm, t) >= base
        assert gronwall_bound(c_lo, dl, dm + 0.1, t) >= base
        assert gronwall_bound(c_lo, dl, dm, 0.0) >= dm - 1e-15


def test_protocol_bound_estimate_examples():
    g = make_uniform_grid(50, 0.0, 2.0)
    assert protocol_bound_estimate(bnn(), zero_kernel_family(g), 50, 0) == 0.0
    est = protocol_bound_estimate(smith(), kernel_cosine(g), 200, 0)
    assert 0.0 < est <= 4.0  # payoff range of the cosine game is [-2, 2]
    prefix = [protocol_bound_estimate(smith(), kernel_cosine(g), k, 0)
              for k in (10, 50, 200)]
    assert prefix[0] <= prefix[1] <= prefix[2]
    with pytest.raises(ValueError):
        protocol_bound_estimate(bnn(), kernel_cosine(g), 0, 0)


def test_union_grid_and_embedding():
    a = make_uniform_grid(5, 0.0, 2.0)
    b = make_uniform_grid(9, 0.0, 2.0)
    u = union_grid(a, b)
    assert set(a.points) <= set(u.points) and set(b.points) <= set(u.points)
    with pytest.raises(ValueError):
        union_grid(a, make_uniform_grid(5, 0.0, 1.0))

    mu = random_measure(a, 0)
    emb = embed(mu, u)
    assert emb.mass() == pytest.approx(1.0, abs=1e-15)
    assert abs(bl_norm(emb - embed(random_measure(a, 1), u))
               - bl_norm(mu - random_measure(a, 1))) <= 1e-12
    with pytest.raises(ValueError):
        embed(random_measure(b, 0), a)


def test_embedding_preserves_bl_norm():
    a = make_uniform_grid(7, 0.0, 2.0)
    b = make_uniform_grid(13, 0.0, 2.0)
    u = union_grid(a, b)
    rng = np.random.Generator(np.random.PCG64(2))
    for _ in range(20):
        nu = DiscreteMeasure(a, rng.normal(size=7), SIGNED)
        assert abs(bl_norm(embed(nu, u)) - bl_norm(nu)) <= 1e-12


def test_refine_study_identical_sizes_gives_zero():
    rep = refine_study(zero_kernel_family, bnn(), (20, 20), gauss_family,
                       1.0, 0.1, horizon_samples=5, lower=0.0, upper=2.0)
    assert rep.rows[0].sup_bl == 0.0


def test_refine_study_zero_kernel_reports_initial_distance():
    rep = refine_study(zero_kernel_family, bnn(), (10, 20), gauss_family,
                       1.0, 0.1, horizon_samples=5, lower=0.0, upper=2.0)
    a, b = make_uniform_grid(10, 0.0, 2.0), make_uniform_grid(20, 0.0, 2.0)
    u = union_grid(a, b)
    want = bl_norm(embed(gauss_family(a), u) - embed(gauss_family(b), u))
    assert abs(rep.rows[0].sup_bl - want) <= 1e-12


def test_refine_study_converges_on_smooth_war():
    rep = refine_study(cts_war_family, bnn(), (25, 50, 100), gauss_family,
                       2.0, 0.01, horizon_samples=25, lower=0.0, upper=2.0)
    seq = rep.sup_bl_sequence()
    assert seq[1] < seq[0]
    assert seq[0] < 0.1
    rep2 = refine_study(cts_war_family, bnn(), (25, 50, 100), gauss_family,
                        2.0, 0.01, horizon_samples=25, lower=0.0, upper=2.0,
                        jobs=2)
    assert rep2.sup_bl_sequence() == seq  # parallel runs are deterministic


def test_refine_study_guards():
    with pytest.raises(ValueError):
        refine_study(zero_kernel_family, bnn(), (20,), gauss_family,
                     1.0, 0.1, lower=0.0, upper=2.0)


def test_write_refine_csv(tmp_path):
    rep = refine_study(zero_kernel_family, bnn(), (10, 20), gauss_family,
                       1.0, 0.1, horizon_samples=5, lower=0.0, upper=2.0)
    path = tmp_path / "refine.csv"
    write_refine_csv(rep, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n_coarse,n_fine,sup_bl,t_of_max"
    n_c, n_f, sup_bl, t_of_max = lines[1].split(",")
    assert (int(n_c), int(n_f)) == (10, 20)
    assert float(sup_bl) == rep.rows[0].sup_bl


def test_choice_mobility_at_limits_is_zero():
    g = make_uniform_grid(9, 0.0, 2.0)
    k = kernel_cosine(g)
    lam = make_uniform_reference(g)
    w = np.zeros(9)
    w[[0, 8]] = 0.5
    x0 = DiscreteMeasure(g, w)
    trs = [simulate_edm(k, bnn(), lam, x0, 1.0, 0.01, sample_every=10)
           for _ in range(3)]
    rep = choice_mobility_trace(trs, [x0, x0, x0])
    assert np.all(rep.c == 0.0)
    assert rep.verdict == "choice-mobile (empirically)"


def test_field_l1_bounded_by_twice_protocol_bound():
    g = make_uniform_grid(30, 0.0, 2.0)
    k = kernel_cosine(g)
    lam = make_uniform_reference(g)
    tr = simulate_edm(k, smith(), lam, gaussian_on_grid(g, 1.0, 0.1),
                      5.0, 0.01, sample_every=50)
    for x, rho in zip(tr.states, tr.payoffs):
        rate_max = float(np.max(np.maximum(
            rho.values[:, None] - rho.values[None, :], 0.0)))
        v = mean_field(smith(), x, rho, lam)
        assert tv_norm(v) <= 2.0 * rate_max + 1e-12


def test_scaled_down_rates_stall_uniformly():
    # protocols phi/k: the slowest family member pins c(t) near its start,
    # and c(t) >= c(0) - 2 max_k(M_k) t pointwise
    g = make_uniform_grid(5, 0.0, 2.0)
    k = kernel_cosine(g)
    lam = make_uniform_reference(g)
    trajs, limits, bounds = [], [], []
    for scale in (1.0, 4.0, 16.0):
        proto = impartial_pc(lambda r, s=scale: np.maximum(r, 0.0) / s)
        tr = simulate_edm(k, proto, lam, dirac(g, 2), 1.0, 0.01, sample_every=10)
        trajs.append(tr)
        limits.append(dirac(g, 0))
        bounds.append(max(
            float(np.max(np.maximum(p.values[:, None] - p.values[None, :], 0.0)) / scale)
            for p in tr.payoffs))
    rep = choice_mobility_trace(trajs, limits, threshold=1e-2)
    assert rep.verdict == "paralysis suspected"
    eps = rep.c[0]
    assert eps > 1.0
    lower = eps - 2.0 * max(bounds) * rep.times
    assert np.all(rep.c >= lower - 1e-12)


def test_choice_mobility_guards():
    g = make_uniform_grid(5, 0.0, 2.0)
    k = kernel_cosine(g)
    lam = make_uniform_reference(g)
    tr = simulate_edm(k, bnn(), lam, dirac(g, 2), 1.0, 0.01, sample_every=10)
    with pytest.raises(ValueError):
        choice_mobility_trace([tr], [])
    with pytest.raises(ValueError):
        choice_mobility_trace([tr], [dirac(make_uniform_grid(5, 0.0, 1.0), 0)])
    short = simulate_edm(k, bnn(), lam, dirac(g, 2), 0.5, 0.01, sample_every=10)
    with pytest.raises(ValueError):
        choice_mobility_trace([tr, short], [dirac(g, 0), dirac(g, 0)])
