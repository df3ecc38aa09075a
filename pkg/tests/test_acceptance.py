"""The eleven acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from abflux import (
    AdmissibleSet,
    ControlVector,
    Profile,
    ToleranceSet,
    adapt_concave,
    check_membership,
    connection_from_level,
    evolve,
    fuel_problem,
    greenshields,
    interface_traces,
    l2_problem,
    make_grid,
    optimize,
    roundtrip_error,
    steer,
)
from abflux.attainability import monotone_verdicts, slope_verdicts
from abflux.controller import Compression, compression_slope, crossing_residual
from abflux.optimize import objective_l2
from abflux.profile import l1_distance
from abflux.riemann import RiemannOracle, godunov_flux_classical, interface_flux_AB
from abflux.solver import interface_trace_history, invariant_interval, mass

import cases

T = cases.T


def test_criterion_01_connection_stationarity(pair, conn, record_property):
    grid = make_grid(-2, 2, 400)
    u0 = cases.k_ab().cell_averages(grid.edges)
    t0 = time.perf_counter()
    fld = evolve(u0, T, pair, conn, grid)
    elapsed = time.perf_counter() - t0
    diff = float(np.max(np.abs(fld.final - u0)))
    record_property("detail", f"max cell change {diff:.1e}, {elapsed:.3f} s")
    assert diff <= 1e-14
    assert elapsed < 1.0


def test_criterion_02_riemann_oracle_equivalence(pair, conn, record_property):
    grid = np.linspace(-2, 2, 41)
    t0 = time.perf_counter()
    oracle = RiemannOracle(pair, conn, np.linspace(-3, 3, 2001))
    d_state = d_flux = 0.0
    for a in grid:
        for b in grid:
            got, ref = interface_traces(pair, conn, a, b), oracle(a, b)
            d_state = max(d_state, abs(got.u_l - ref.u_l), abs(got.u_r - ref.u_r))
            d_flux = max(d_flux, abs(got.flux - ref.flux))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"state {d_state:.1e}, flux {d_flux:.1e}, {elapsed:.1f} s")
    assert d_state <= 2e-3
    assert d_flux <= 1e-6
    assert elapsed < 30.0


def test_criterion_03_classical_reduction(same, record_property):
    pair, conn = same
    a, b = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-2, 2, 41))
    got = interface_flux_AB(pair, conn, a, b)
    ref = godunov_flux_classical(pair.f_l, pair.theta_l, a, b)
    diff = float(np.max(np.abs(got - ref)))
    record_property("detail", f"max flux difference {diff:.1e} on 41x41")
    assert diff <= 1e-14


# exact solutions at time t, written out by hand for the quadratic pair at level 1/8
def _shock(x, t):
    # flux 1/2 crosses the interface unchanged, then the right shock 1 -> 0 moves at speed 1/2
    return np.where(x < 0.5 * t, 1.0, 0.0)


def _rarefaction(x, t):
    # traces (1, 1); the right fan 1 -> 2 spans speeds f_r' = 2u - 1/2 in [1.5, 3.5]
    xi = x / t
    return np.where(xi < 1.5, 1.0, np.where(xi > 3.5, 2.0, (xi + 0.5) / 2))


def _connection(x, t):
    # traces (A, B); left fan -1 -> -1/2 with u = x/t, right fan B -> 1 with u = (x/t + 1/2)/2
    xi = x / t
    left = np.clip(xi, -1.0, cases.A)
    right = np.clip((xi + 0.5) / 2, cases.B, 1.0)
    return np.where(x < 0, left, right)


def _l1_vs(exact, fld, t):
    g = fld.grid
    nodes, w = np.polynomial.legendre.leggauss(8)
    pts = g.centers[:, None] + 0.5 * g.dx * nodes[None, :]
    return float(np.sum(0.5 * g.dx * (np.abs(fld.final[:, None] - exact(pts, t)) @ w)))


def test_criterion_04_solver_convergence(pair, conn, record_property):
    t0 = time.perf_counter()
    problems = {"shock": ((1, 0), _shock), "rarefaction": ((1, 2), _rarefaction), "connection": ((-1, 1), _connection)}
    report, ok = [], True
    for name, ((a, b), exact) in problems.items():
        errs = {}
        for n in (200, 800, 1600):
            fld = evolve(Profile((), a, b), T, pair, conn, make_grid(-2, 2, n), cfl=0.9)
            errs[n] = _l1_vs(exact, fld, T)
        order = math.log(errs[200] / errs[1600]) / math.log(8)
        report.append(f"{name} e800={errs[800]:.4f} order={order:.2f}")
        ok &= order >= 0.7 and errs[800] <= 0.02
    elapsed = time.perf_counter() - t0
    record_property("detail", "; ".join(report) + f"; {elapsed:.1f} s")
    assert ok
    assert elapsed < 60.0


def test_criterion_05_conservation_and_bounds(pair, conn, record_property):
    grid = make_grid(-8, 8, 800)
    worst_mass = worst_excess = 0.0
    for seed in range(50):
        data = cases.random_step_data(seed)
        u0 = Profile(data.pieces, 0.0, 0.0)
        fld = evolve(u0, T, pair, conn, grid)
        vals = u0.cell_averages(grid.edges)
        lo, hi = invariant_interval(pair, conn, min(vals.min(), 0.0), max(vals.max(), 0.0))
        worst_mass = max(worst_mass, abs(mass(fld.final, grid) - mass(vals, grid)))
        worst_excess = max(worst_excess, float(np.max(fld.states - hi)), float(np.max(lo - fld.states)))
    record_property("detail", f"max mass drift {worst_mass:.1e}, max bound excess {worst_excess:.1e}")
    assert worst_mass <= 1e-10
    assert worst_excess <= 1e-12


def test_criterion_06_checker_soundness(pair, conn, record_property):
    grid = make_grid(-3, 3, 1000)
    tol = ToleranceSet.scaled(grid.dx)
    passed, hard = 0, 0
    for seed in range(50):
        omega = evolve(cases.random_step_data(seed), T, pair, conn, grid).final_profile()
        r = check_membership(omega, T, pair, conn, tol)
        passed += r.member
        hard += bool(r.hard_violations)
    record_property("detail", f"{passed}/50 members, {hard} with hard violations")
    assert passed >= 48
    assert hard == 0


def test_criterion_07_dini_monotone_equivalence(pair, conn, record_property):
    disagreements = segments = rejected = 0
    for cls, L, R, omega in cases.dini_suite().values():
        slope = slope_verdicts(omega, T, pair, conn, cls, L, R)
        mono = monotone_verdicts(omega, T, pair, conn, cls, L, R)
        assert [s[:3] for s in slope] == [m[:3] for m in mono]
        disagreements += sum(s[3] != m[3] for s, m in zip(slope, mono))
        segments += len(slope)
        rejected += sum(not s[3] for s in slope)
    record_property("detail", f"{disagreements} disagreements over {segments} segments ({rejected} rejected)")
    assert disagreements == 0
    # the suite must exercise both verdicts
    assert 0 < rejected < segments


def test_criterion_08_roundtrip_controllability(pair, conn, record_property):
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for name, omega in cases.steering_battery().items():
        r = check_membership(omega, T, pair, conn)
        assert r.member, name
        plan = steer(omega, T, pair, conn, r)
        errs = [roundtrip_error(plan, make_grid(-3, 3, n))["relative_l1_error"] for n in (500, 1000, 2000)]
        worst = max(worst, errs[-1])
        exact = errs[0] <= 1e-12
        if errs[-1] > 0.05 or not (exact or errs[0] > errs[1] > errs[2]):
            bad.append(f"{name} {errs}")
    elapsed = time.perf_counter() - t0
    record_property("detail", f"worst relative L1 at 2000 cells {worst:.4f}, {elapsed:.0f} s" + (f"; failing: {bad}" if bad else ""))
    assert not bad
    assert elapsed < 300.0


def _arrival(alpha, x, pair, T):
    """Where the line leaving (x, 0) with speed alpha is at time T, after refracting at x=0.

    Closed forms for the quadratic pair; NaN when the line does not cross in time.
    """
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = -x / alpha
        if x > 0:
            u0 = (alpha + 0.5) / 2  # f_r' = 2u - 1/2
            level = u0 * u0 - 0.5 * u0
            u_fin = -np.sqrt(2 * level)  # left branch of u^2/2
            y = u_fin * (T - tau)
        else:
            u0 = alpha  # f_l' = u
            level = 0.5 * u0 * u0
            u_fin = (0.5 + np.sqrt(0.25 + 4 * level)) / 2  # right branch of u^2 - u/2
            y = (2 * u_fin - 0.5) * (T - tau)
    return np.where((tau > 0) & (tau < T) & (level >= 0.125), y, np.nan)


def test_criterion_09_compression_slopes(pair, conn, record_property):
    residual = 0.0
    mismatch = 0.0
    n_checked = 0
    for name in ("refracted_shock", "two_refracted_gaps", "constant_minus_one", "one_shock"):
        omega = cases.steering_battery()[name]
        plan = steer(omega, T, pair, conn)
        residual = max(residual, plan.diagnostics["max_crossing_residual"])
        for comp in plan.partition.compressions:
            if not comp.crossing:
                continue
            for x in np.linspace(comp.lo, comp.hi, 9)[1:-1]:
                if x == 0 or (x > 0) == (comp.focus > 0):
                    continue  # same-side part of a straddling gap
                alpha = compression_slope(x, comp.focus, pair, conn, T)
                residual = max(residual, abs(crossing_residual(x, comp.focus, alpha, pair, T)))
                scan = np.linspace(-6.0, -1e-9, 100_000) if x > 0 else np.linspace(1e-9, 6.0, 100_000)
                y = _arrival(scan, x, pair, T)
                best = scan[np.nanargmin(np.abs(y - comp.focus))]
                mismatch = max(mismatch, abs(best - alpha))
                n_checked += 1
    record_property("detail", f"{n_checked} slopes, max residual {residual:.1e}, max scan mismatch {mismatch:.1e}")
    assert n_checked > 0
    assert residual <= 1e-10 * T
    assert mismatch <= 1e-4


def test_criterion_10_trace_persistence(pair, conn, record_property):
    grid = make_grid(-2, 2, 800)
    fld = evolve(Profile((), -1, 1), T, pair, conn, grid, n_out=100)
    solver_traces = max(max(abs(tp.u_l - conn.A), abs(tp.u_r - conn.B)) for tp in fld.trace_history[1:])
    worst = 0.0
    for band in (1, 2):
        for t, tp in interface_trace_history(fld, band):
            if t >= 0.1 * T:
                worst = max(worst, abs(tp.u_l - conn.A), abs(tp.u_r - conn.B))
    record_property("detail", f"interface traces off by {solver_traces:.1e}; cells within 2 of x=0 off by {worst:.1e} (tol {2 * grid.dx})")
    assert solver_traces <= 1e-12
    assert worst <= 2 * grid.dx


def _traffic():
    return adapt_concave(greenshields(1.0, 1.0), greenshields(2.0, 1.0), 1.0)


def test_criterion_11_optimizer(record_property):
    pair, adapter = _traffic()
    grid = make_grid(-4, 4, 200)
    window = (-3, 3)
    notes = []

    # self-target: the target is produced by a known admissible control
    adm = AdmissibleSet.from_boxes([((-1, 1), (-1.0, 0.0))], (-1, 1), pair, m=20)
    mid = 0.5 * (adm.edges[:-1] + adm.edges[1:])
    g_lo, g_hi = adm.gamma_range
    known = ControlVector(-(0.5 + 0.3 * np.sin(2 * mid)), g_lo + 0.6 * (g_hi - g_lo))
    target = evolve(known.profile(adm), T, pair, connection_from_level(pair, known.gamma), grid).final_profile()
    norm = objective_l2(np.zeros(grid.n_cells), target, window, grid)
    t0 = time.perf_counter()
    res = optimize(l2_problem(pair, adm, target, window, T, grid, budget=2000, seed=1))
    t_self = time.perf_counter() - t0
    notes.append(f"self-target J/|l|^2={res.J / norm:.4f} ({t_self:.0f} s)")

    # singleton feasible set: zero data at the critical level
    crit = pair.critical_level()
    adm0 = AdmissibleSet.from_boxes([((-1, 1), (0.0, 0.0))], (-1, 1), pair, m=20, gamma_range=(crit, crit))
    res0 = optimize(l2_problem(pair, adm0, target, window, T, grid, budget=2000, seed=1))
    notes.append(f"singleton J-|l|^2={res0.J - norm:.1e} in {res0.evaluations} evaluation(s)")

    # fuel with P = 1: J is T times the conserved mass, minimal with every density at its lower bound
    admf = AdmissibleSet.from_boxes([((-1, 1), (-0.8, -0.2))], (-1, 1), pair, m=20)
    t0 = time.perf_counter()
    resf = optimize(fuel_problem(pair, admf, [1.0], T, grid, adapter=adapter, budget=2000, seed=1))
    t_fuel = time.perf_counter() - t0
    dx_k = admf.edges[1] - admf.edges[0]
    m_best = float(np.sum(-resf.best.values) * dx_k)
    m_min = float(np.sum(-admf.hi) * dx_k)
    notes.append(f"fuel J={resf.J:.6f} vs T*mass={T * m_best:.6f}, mass {m_best:.4f} (min {m_min:.4f}) ({t_fuel:.0f} s)")
    record_property("detail", "; ".join(notes))

    assert res.J <= 1e-2 * norm
    assert res0.evaluations == 1 and res0.J == pytest.approx(norm, rel=1e-12, abs=0)
    assert abs(resf.J - T * m_best) <= 1e-6 * T * m_best
    assert abs(m_best - m_min) <= 1e-3
    assert max(t_self, t_fuel) < 300.0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
