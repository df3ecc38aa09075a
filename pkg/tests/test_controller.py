import numpy as np
import pytest

from abflux import MembershipRequired, Profile, evaluate, make_grid, reconstruct_field, steer
from abflux.attainability import phi_map
from abflux.controller import build_fan, compression_slope, crossing_residual, partition_initial_line
from abflux.riemann import classify_trace_pair

import cases

T = 1.0
BATTERY = cases.steering_battery()


@pytest.fixture(scope="module")
def plans():
    pair, conn = cases.quadratic_pair()
    return {name: steer(omega, T, pair, conn) for name, omega in BATTERY.items()}


def _constant_one_feet(x):
    # direct lines on the left, refracted lines meeting x=0 at T - x/1.5, direct again past x=1.5
    return np.where(x < 0, x - 1.0, np.where(x < 1.5, -(T - x / 1.5), x - 1.5))


def test_fan_feet_match_the_foot_map(pair, conn):
    omega = Profile.constant(1.0)
    fan = build_fan(omega, T, pair, conn)
    inside = np.abs(fan.x - 1.5) > 1e-9
    np.testing.assert_allclose(fan.foot[inside], _constant_one_feet(fan.x[inside]), atol=1e-10)
    m = phi_map(omega, T, pair, conn, "A1", R=1.5)
    np.testing.assert_allclose(m.left, _constant_one_feet(m.x), atol=1e-10)
    assert fan.monotonicity_defect() == 0.0


def test_single_downward_jump_gives_one_compression(plans):
    part = plans["one_shock"].partition
    assert len(part.compressions) == 1
    comp = part.compressions[0]
    assert comp.focus == pytest.approx(1.0) and comp.lo < comp.hi
    assert not part.rarefaction_centers


def test_centred_wave_gives_a_rarefaction_at_the_origin(same):
    pair, conn = same
    omega = Profile.from_points([-1, 1], [-1.0, 1.0])
    part = partition_initial_line(build_fan(omega, T, pair, conn), omega, T)
    assert part.rarefaction_centers == pytest.approx((0.0,), abs=1e-12)
    assert not part.compressions


def test_crossing_residual_vanishes_at_the_computed_slope(pair, conn):
    for x, y in ((0.5, -0.4), (-0.8, 0.3), (1.2, -1.0)):
        alpha = compression_slope(x, y, pair, conn, T)
        assert abs(crossing_residual(x, y, alpha, pair, T)) <= 1e-10


def test_constant_targets_steer_to_themselves(plans, pair, conn, same):
    u0 = plans["constant_one"].u0
    xs = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(u0(xs), 1.0, atol=1e-12)
    np.testing.assert_allclose(steer(Profile.constant(1.0), T, *same).u0(xs), 1.0, atol=1e-12)


def test_connection_profile_is_stationary(plans):
    u0 = plans["k_AB"].u0
    assert u0.limits(0.0) == (cases.A, pytest.approx(cases.B, abs=1e-12))
    xs = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(u0(xs), cases.k_ab()(xs), atol=1e-12)


def test_non_member_is_refused(pair, conn):
    with pytest.raises(MembershipRequired):
        steer(Profile.step(0.5, 0.0, 1.0), T, pair, conn)


@pytest.mark.parametrize("name", sorted(BATTERY))
def test_reconstruction_endpoints_and_traces(plans, name):
    plan = plans[name]
    grid = make_grid(-3, 3, 300)
    fld = reconstruct_field(plan, grid, n_out=8)
    np.testing.assert_array_equal(fld.final, plan.target(grid.centers))
    # away from the breakpoints of the datum the t=0 level is the datum itself
    x = grid.centers
    far = np.min(np.abs(x[:, None] - plan.u0.breakpoints()[None, :]), axis=1) > grid.dx
    np.testing.assert_allclose(fld.states[0][far], plan.u0(x[far]), atol=1e-8)
    for t, tp in zip(fld.times[1:], fld.trace_history[1:]):
        assert classify_trace_pair(plan.pair, plan.conn, tp, tol=1e-6) != "inadmissible", t


@pytest.mark.parametrize("name", sorted(BATTERY))
def test_values_stay_within_the_bound(plans, name):
    plan = plans[name]
    M = plan.diagnostics["bound_M"]
    assert plan.diagnostics["u0_sup"] <= M + 1e-12
    xs = np.linspace(-4, 4, 801)
    for t in (0.0, 0.3, 0.7, 0.99):
        assert np.max(np.abs(evaluate(plan, xs, t))) <= M + 1e-9


@pytest.mark.parametrize("name", ["constant_minus_one", "refracted_shock", "emission_with_rarefactions", "emission_cut_by_shock", "two_refracted_gaps"])
def test_flux_balance_on_space_time_boxes(plans, name):
    plan = plans[name]
    rng = np.random.default_rng(11)
    for _ in range(4):
        side = rng.choice([-1, 1])
        a, b = sorted(side * rng.uniform(0.05, 2.5, 2))
        t1, t2 = sorted(rng.uniform(0.0, 0.99, 2))
        f = plan.pair.f_l if side < 0 else plan.pair.f_r
        xs = np.linspace(a, b, 8001)
        ts = np.linspace(t1, t2, 801)
        inflow = np.trapezoid([f(evaluate(plan, [a, b], t)) for t in ts], ts, axis=0)
        change = np.trapezoid(evaluate(plan, xs, t2), xs) - np.trapezoid(evaluate(plan, xs, t1), xs)
        assert abs(change - (inflow[0] - inflow[1])) <= 1e-4


def test_plan_serializes(plans):
    d = plans["one_shock"].to_dict()
    assert d["class"] == "A1" and d["partition"]["compressions"]
    assert Profile.from_dict(d["u0"]) == plans["one_shock"].u0
