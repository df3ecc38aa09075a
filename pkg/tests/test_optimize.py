import numpy as np
import pytest

from abflux import (
    AdmissibleSet,
    ControlVector,
    Profile,
    adapt_concave,
    connection_from_level,
    evolve,
    fuel_problem,
    greenshields,
    l2_problem,
    make_grid,
    optimize,
)
from abflux.optimize import objective_fuel, objective_l2, project

T = 1.0


@pytest.fixture(scope="module")
def traffic():
    return adapt_concave(greenshields(1.0, 1.0), greenshields(2.0, 1.0), 1.0)


def _box(pair, lo=-0.8, hi=-0.2, m=8, gamma_range=None):
    return AdmissibleSet.from_boxes([((-1, 1), (lo, hi))], (-1, 1), pair, m=m, gamma_range=gamma_range)


def test_projection_clamps_values_and_level(traffic):
    pair, _ = traffic
    adm = _box(pair, m=4)
    v = project(ControlVector(np.array([-2.0, -0.5, 0.0, 3.0]), 99.0), adm)
    assert v.values.tolist() == [-0.8, -0.5, -0.2, -0.2]
    assert v.gamma == adm.gamma_range[1]
    assert project(ControlVector(np.zeros(4), -99.0), adm).gamma == adm.gamma_range[0]


def test_boxes_intersect_and_uncovered_cells_are_zero(traffic):
    pair, _ = traffic
    adm = AdmissibleSet.from_boxes([((-1, 0), (-1, 0)), ((-1, -0.5), (-0.5, 0.0))], (-1, 1), pair, m=4)
    assert adm.lo.tolist() == [-0.5, -1.0, 0.0, 0.0]
    assert adm.hi.tolist() == [0.0, 0.0, 0.0, 0.0]


def test_invalid_admissible_sets(traffic):
    with pytest.raises(ValueError):
        AdmissibleSet(np.array([0.0, 1.0]), np.array([1.0]), np.array([0.0]), (0.0, 1.0))
    with pytest.raises(ValueError):
        AdmissibleSet(np.array([0.0, 1.0]), np.array([0.0]), np.array([0.0]), (1.0, 0.0))


def test_l2_objective_examples():
    grid = make_grid(-1, 1, 200)
    target = Profile.constant(0.5)
    assert objective_l2(np.full(200, 0.5), target, (-1, 1), grid) == 0.0
    assert objective_l2(np.full(200, 0.6), target, (-1, 1), grid) == pytest.approx(0.02)
    # only the part of the window counts
    assert objective_l2(np.full(200, 0.6), target, (-0.5, 0.5), grid) == pytest.approx(0.01)


def _fuel_field(traffic, rho0, cells):
    pair, _ = traffic
    conn = connection_from_level(pair, pair.critical_level())
    return evolve(Profile.constant(0.0) if rho0 is None else rho0, T, pair, conn, make_grid(-4, 4, cells), n_out=40)


def test_fuel_of_an_empty_road_is_zero(traffic):
    _, adapter = traffic
    assert objective_fuel(_fuel_field(traffic, None, 200), [1.0, 2.0], adapter=adapter) == 0.0


def test_constant_fuel_rate_is_time_times_mass(traffic):
    _, adapter = traffic
    u0 = Profile(((-1, 1, -0.4, -0.4),), 0.0, 0.0)
    J = objective_fuel(_fuel_field(traffic, u0, 400), [1.0], adapter=adapter)
    assert J == pytest.approx(T * 0.8, rel=1e-12)


def test_linear_fuel_rate_converges_to_a_fine_reference(traffic):
    _, adapter = traffic
    u0 = Profile(((-1, 0, -0.7, -0.7), (0, 1, -0.3, -0.3)), 0.0, 0.0)
    coarse = objective_fuel(_fuel_field(traffic, u0, 400), [0.0, 1.0], adapter=adapter)
    fine = objective_fuel(_fuel_field(traffic, u0, 4000), [0.0, 1.0], adapter=adapter)
    assert coarse == pytest.approx(fine, rel=0.02)


def test_fuel_needs_a_velocity_without_adapter(traffic):
    with pytest.raises(ValueError):
        objective_fuel(_fuel_field(traffic, None, 100), [0.0, 1.0])


def test_singleton_costs_one_evaluation(traffic):
    pair, _ = traffic
    crit = pair.critical_level()
    adm = _box(pair, 0.0, 0.0, gamma_range=(crit, crit))
    grid = make_grid(-2, 2, 100)
    res = optimize(l2_problem(pair, adm, Profile.constant(0.0), (-2, 2), T, grid))
    assert res.evaluations == 1 and res.J == 0.0


def test_same_seed_same_result(traffic):
    pair, _ = traffic
    adm = _box(pair, m=4)
    grid = make_grid(-2, 2, 80)
    target = Profile(((-1, 1, -0.5, -0.5),), 0.0, 0.0)

    def run(seed):
        return optimize(l2_problem(pair, adm, target, (-2, 2), T, grid, budget=120, seed=seed))

    a, b = run(3), run(3)
    assert a.J == b.J and a.evaluations == b.evaluations <= 120
    np.testing.assert_array_equal(a.best.values, b.best.values)
    assert [h[1] for h in a.history] == sorted((h[1] for h in a.history), reverse=True)


def test_recovers_a_reachable_target(traffic):
    pair, _ = traffic
    adm = _box(pair, m=4, gamma_range=(pair.critical_level(),) * 2)
    grid = make_grid(-3, 3, 120)
    known = ControlVector(np.array([-0.7, -0.3, -0.6, -0.4]), adm.gamma_range[0])
    conn = connection_from_level(pair, known.gamma)
    target = evolve(known.profile(adm), T, pair, conn, grid).final_profile()
    norm = objective_l2(np.zeros(grid.n_cells), target, (-3, 3), grid)
    res = optimize(l2_problem(pair, adm, target, (-3, 3), T, grid, budget=600, seed=0))
    assert res.J <= 1e-3 * norm
    for v in res.best.values:
        assert adm.lo.min() <= v <= adm.hi.max()


def test_fuel_problem_prefers_light_traffic(traffic):
    pair, adapter = traffic
    adm = _box(pair, m=4)
    res = optimize(fuel_problem(pair, adm, [1.0], T, make_grid(-3, 3, 120), adapter=adapter, budget=300, seed=0))
    np.testing.assert_allclose(res.best.values, adm.hi, atol=1e-3)
