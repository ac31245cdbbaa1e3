import math

import numpy as np
import pytest

from kpztail.grids import (
    Potential,
    SpaceGrid,
    SpaceTimeDeviation,
    TimeGrid,
    heat_kernel,
    l2_norm_space,
)
from kpztail.solver import (
    SolverConfig,
    SolverInstabilityError,
    adjoint_solve,
    chaos_series_point,
    log_terminal_and_gradient,
    operator_norm,
    propagate,
    solve_delta,
    solve_delta_scaled,
)
from kpztail.spectral import f_time_integral, rho_star
from kpztail.testing import random_smooth_deviation, rng_from_seed

from conftest import zero_deviation


def test_zero_deviation_reproduces_heat_kernel():
    # lighter grid than the acceptance run; same per-slice sup-relative metric
    sg = SpaceGrid(20.0, 4001)
    tg = TimeGrid(0.0, 2.0, 500)
    fld = solve_delta(zero_deviation(tg, sg))
    mask = np.abs(sg.x) <= 5.0
    worst = 0.0
    for k, t in enumerate(tg.times):
        if t < 0.5:
            continue
        exact = heat_kernel(t, sg.x[mask])
        worst = max(worst, float(np.max(np.abs(fld.values[k][mask] - exact)) / exact.max()))
    assert worst <= 5e-5
    assert fld.strictly_positive and fld.values.min() > 0


def test_solver_positivity_and_monotonicity():
    # dt <= 2 dx^2 keeps the step matrices entrywise monotone
    sg = SpaceGrid(10.0, 201)
    tg = TimeGrid(0.0, 2.0, 160)
    rng = rng_from_seed(101)
    for _ in range(50):
        rho1 = random_smooth_deviation(rng, tg, sg)
        bump = random_smooth_deviation(rng, tg, sg, amp_range=(0.05, 0.5))
        rho2 = SpaceTimeDeviation(tg, sg, rho1.values + bump.values)
        z1 = solve_delta(rho1)
        z2 = solve_delta(rho2)
        assert z1.values.min() > 0
        assert np.all(z1.values <= z2.values * (1 + 1e-12) + 1e-250)


def test_grid_convergence_second_order():
    vals = []
    for n_x, n_t in ((251, 50), (501, 100), (1001, 200)):
        sg = SpaceGrid(10.0, n_x)
        tg = TimeGrid(0.0, 2.0, n_t)
        rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
        vals.append(solve_delta(rho).at(2.0, 0.0))
    d1 = abs(vals[1] - vals[0])
    d2 = abs(vals[2] - vals[1])
    assert d2 <= d1 / 3.0  # ~4x shrink for a second-order scheme


def test_instability_error_names_step():
    sg = SpaceGrid(10.0, 201)
    tg = TimeGrid(0.0, 1.0, 100)
    vals = np.zeros((101, 201))
    vals[40:, 100] = -5e5  # violent sink makes the explicit half negative
    with pytest.raises(SolverInstabilityError, match=r"step"):
        solve_delta(SpaceTimeDeviation(tg, sg, vals))


def test_propagate_heat_semigroup():
    sg = SpaceGrid(20.0, 4001)
    tg = TimeGrid(0.0, 2.0, 400)
    rho = zero_deviation(tg, sg)
    f = Potential(sg, heat_kernel(1.0, sg.x))
    out = propagate(rho, 0.0, 1.0, f)
    err = np.max(np.abs(out.values - heat_kernel(2.0, sg.x))) / heat_kernel(2.0, 0.0)
    assert err <= 1e-5


def test_propagate_composition_is_exact():
    sg = SpaceGrid(20.0, 1001)
    tg = TimeGrid(0.0, 2.0, 200)
    rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
    f = Potential(sg, heat_kernel(1.0, sg.x))
    once = propagate(rho, 0.0, 2.0, f)
    twice = propagate(rho, 1.0, 2.0, propagate(rho, 0.0, 1.0, f))
    assert np.max(np.abs(once.values - twice.values)) <= 1e-8


def test_propagate_linear_and_ordering():
    sg = SpaceGrid(10.0, 401)
    tg = TimeGrid(0.0, 1.0, 100)
    rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
    f = Potential(sg, heat_kernel(0.5, sg.x))
    g = Potential(sg, heat_kernel(1.5, sg.x))
    combo = propagate(rho, 0.0, 1.0, Potential(sg, 2.0 * f.values + 3.0 * g.values))
    parts = 2.0 * propagate(rho, 0.0, 1.0, f).values + 3.0 * propagate(rho, 0.0, 1.0, g).values
    assert np.max(np.abs(combo.values - parts)) <= 1e-12
    with pytest.raises(ValueError):
        propagate(rho, 1.0, 1.0, f)


def test_propagate_growth_matches_ground_state():
    # (1/t) log <P f, f> stabilizes at the ground-state value for f = sech/sqrt(2)
    sg = SpaceGrid(20.0, 2001)
    f = Potential(sg, 1.0 / np.cosh(sg.x) / math.sqrt(2.0))
    w = sg.trapezoid_weights()
    rates = []
    for t_end in (4.0, 8.0):
        tg = TimeGrid(0.0, t_end, int(t_end / 0.01))
        rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
        val = float(np.dot(w, propagate(rho, 0.0, t_end, f).values * f.values))
        rates.append(math.log(val) / t_end)
    # f is the ground state, so the rate is flat at the discrete eigenvalue
    for r in rates:
        assert r == pytest.approx(0.5, abs=1e-3)
    assert abs(rates[1] - rates[0]) <= 1e-6


def test_chaos_series_examples():
    sg = SpaceGrid(10.0, 2001)
    tg = TimeGrid(0.0, 1.0, 500)
    rho = SpaceTimeDeviation.time_constant(tg, Potential(sg, 0.1 / np.cosh(sg.x) ** 2))
    # order 0 is the bare kernel
    assert chaos_series_point(rho, 1.0, 0.0, 0) == heat_kernel(1.0, 0.0)
    z_cn = solve_delta(rho).at(1.0, 0.0)
    sums = [chaos_series_point(rho, 1.0, 0.0, k) for k in range(7)]
    assert abs(sums[6] - z_cn) / z_cn <= 1e-3
    diffs = [abs(b - a) for a, b in zip(sums, sums[1:])]
    for a, b in zip(diffs, diffs[1:]):
        assert b <= 0.5 * a


def test_chaos_scheme_field():
    sg = SpaceGrid(10.0, 401)
    tg = TimeGrid(0.0, 1.0, 100)
    rho = SpaceTimeDeviation.time_constant(tg, Potential(sg, 0.1 / np.cosh(sg.x) ** 2))
    cn = solve_delta(rho)
    series = solve_delta(rho, SolverConfig(scheme="chaos_series", chaos_order=6))
    k = tg.index_of(1.0)
    rel = np.max(np.abs(series.values[k] - cn.values[k])) / cn.values[k].max()
    assert rel <= 1e-3


def test_scaling_identity():
    lam = 4.0
    sg = SpaceGrid(20.0, 2001)
    tg_short = TimeGrid(0.0, 2.0, 500)
    scaled = SpaceTimeDeviation.time_constant(
        tg_short, Potential(sg, lam / np.cosh(math.sqrt(lam) * sg.x) ** 2))
    lhs = solve_delta(scaled).at(2.0, 0.0)
    tg_long = TimeGrid(0.0, 2.0 * lam, 2000)
    rhs = math.sqrt(lam) * solve_delta(
        SpaceTimeDeviation.time_constant(tg_long, rho_star(sg))).at(2.0 * lam, 0.0)
    assert lhs == pytest.approx(rhs, rel=1e-3)


def test_operator_norm_heat_contraction():
    # wide box so the lowest Dirichlet mode sits within 1e-6 of 1
    sg = SpaceGrid(2000.0, 4001)
    tg = TimeGrid(0.0, 2.0, 200)
    rho = zero_deviation(tg, sg)
    start = np.cos(np.pi * sg.x / (2 * sg.half_width))
    res = operator_norm(rho, 0.0, 2.0, iters=40, start=start)
    assert res.converged
    assert res.value <= 1.0
    assert res.value == pytest.approx(1.0, abs=1e-6)


def test_operator_norm_sech2_tightness(grid20):
    tg = TimeGrid(0.0, 2.0, 200)
    rho = SpaceTimeDeviation.time_constant(tg, rho_star(grid20))
    res = operator_norm(rho, 0.0, 2.0, iters=80)
    assert 0.9 * math.e <= res.value <= math.e * (1 + 1e-3)


def test_operator_norm_random_bound():
    sg = SpaceGrid(10.0, 201)
    tg = TimeGrid(0.0, 2.0, 100)
    rng = rng_from_seed(77)
    for _ in range(10):
        rho = random_smooth_deviation(rng, tg, sg)
        est = operator_norm(rho, 0.0, 2.0, iters=60).value
        assert est <= math.exp(f_time_integral(rho)) * (1 + 1e-3)
    with pytest.raises(ValueError):
        operator_norm(rho, 0.0, 2.0, iters=5)


def test_adjoint_heat_time_reversal():
    sg = SpaceGrid(10.0, 1001)
    tg = TimeGrid(0.0, 2.0, 400)
    rho = zero_deviation(tg, sg)
    eps = 4e-3
    a = adjoint_solve(rho, Potential(sg, heat_kernel(eps, sg.x)))
    worst = 0.0
    for s in (0.5, 1.0, 1.5):
        k = tg.index_of(s)
        worst = max(worst, float(np.max(np.abs(a.values[k] - heat_kernel(2.0 - s + eps, sg.x)))))
    assert worst <= 1e-4


def test_adjoint_duality_constant():
    sg = SpaceGrid(10.0, 401)
    tg = TimeGrid(0.0, 2.0, 200)
    rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
    z = solve_delta(rho)
    term = np.zeros(sg.n_points)
    term[sg.center_index] = 1.0 / sg.dx
    a = adjoint_solve(rho, Potential(sg, term))
    w = sg.trapezoid_weights()
    inner_05 = float(np.dot(w, a.values[tg.index_of(0.5)] * z.values[tg.index_of(0.5)]))
    inner_15 = float(np.dot(w, a.values[tg.index_of(1.5)] * z.values[tg.index_of(1.5)]))
    assert inner_05 == pytest.approx(inner_15, rel=1e-6)


def test_exact_gradient_matches_finite_differences():
    sg = SpaceGrid(10.0, 201)
    tg = TimeGrid(0.0, 2.0, 100)
    rng = rng_from_seed(5)
    rho = random_smooth_deviation(rng, tg, sg)
    _, partials = log_terminal_and_gradient(rho)
    h = 1e-6
    for k, i in [(0, 100), (1, 95), (50, 105), (99, 100), (100, 98)]:
        up = rho.values.copy()
        up[k, i] += h
        lp = solve_delta_scaled(SpaceTimeDeviation(tg, sg, up)).log_at(2.0, 0.0)
        up[k, i] -= 2 * h
        lm = solve_delta_scaled(SpaceTimeDeviation(tg, sg, up)).log_at(2.0, 0.0)
        fd = (lp - lm) / (2 * h)
        assert partials[k, i] == pytest.approx(fd, rel=2e-6, abs=1e-9)


def test_renormalized_march_reports_log_values():
    sg = SpaceGrid(20.0, 401)
    tg = TimeGrid(0.0, 16.0, 800)
    rho = SpaceTimeDeviation.time_constant(tg, rho_star(sg))
    sol = solve_delta_scaled(rho)
    # growth rate of log Z(t, 0) approaches the ground-state value 1/2
    l1 = sol.log_at(8.0, 0.0)
    l2 = sol.log_at(16.0, 0.0)
    assert (l2 - l1) / 8.0 == pytest.approx(0.5, abs=2e-3)
