import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abflux import PolyFlux, TracePair, interface_riemann_sample, interface_traces
from abflux.riemann import (
    classical_riemann_sample,
    classify_trace_pair,
    godunov_flux_classical,
    interface_flux_AB,
    riemann_oracle,
    trace_set_tags,
)

import cases

BURGERS = PolyFlux([0, 0, 0.5])
states = st.floats(-2.5, 2.5)


@pytest.mark.parametrize("a, b, F", [(-1, 1, 0.0), (1, -1, 0.5), (2, 1, 2.0)])
def test_classical_godunov_flux(a, b, F):
    assert godunov_flux_classical(BURGERS, 0.0, a, b) == F


def test_interface_flux_examples(pair, conn):
    assert interface_flux_AB(pair, conn, 1.0, 0.0) == pytest.approx(0.5)
    assert interface_flux_AB(pair, conn, -1.0, 1.0) == pytest.approx(0.125)


def test_trace_examples(pair, conn):
    tp = interface_traces(pair, conn, -1.0, 1.0)
    assert (tp.u_l, tp.u_r) == pytest.approx((cases.A, cases.B), abs=1e-12)
    tp = interface_traces(pair, conn, 1.0, 0.0)
    assert (tp.u_l, tp.u_r, tp.flux) == pytest.approx((1.0, 1.0, 0.5), abs=1e-12)
    tp = interface_traces(pair, conn, conn.A, conn.B)
    assert (tp.u_l, tp.u_r) == (conn.A, conn.B)


def test_classification(pair, conn):
    assert classify_trace_pair(pair, conn, interface_traces(pair, conn, 1.0, 1.0)) == "T1"
    assert classify_trace_pair(pair, conn, interface_traces(pair, conn, -1.0, 1.0)) == "AB"
    assert classify_trace_pair(pair, conn, TracePair(0.2, -0.5, 0.0)) == "inadmissible"
    assert "AB" in trace_set_tags(pair, conn, conn.A, conn.B)


@pytest.mark.parametrize("a, b", [(-1, 1), (1, 0), (0.2, -0.5), (-2, -1), (2, 2), (0.3, 0.1), (-0.2, 1.5)])
def test_agrees_with_brute_force_oracle(pair, conn, a, b):
    fast = interface_traces(pair, conn, a, b)
    slow = riemann_oracle(pair, conn, a, b, np.linspace(-3, 3, 3001))
    assert fast.flux == pytest.approx(slow.flux, abs=1e-10)
    assert (fast.u_l, fast.u_r) == pytest.approx((slow.u_l, slow.u_r), abs=1e-10)


@pytest.mark.parametrize("a, b", [(-1, 1), (1, -1), (0.5, 0.5), (-0.3, 0.8)])
def test_identical_fluxes_reduce_to_classical(same, a, b):
    pair, conn = same
    tp = interface_traces(pair, conn, a, b)
    left, right = classical_riemann_sample(BURGERS, a, b, np.array([-1e-14, 1e-14]))
    if not (a < 0 < b):
        # away from the sonic point the interface sees the classical traces
        assert (tp.u_l, tp.u_r) == pytest.approx((left, right), abs=1e-9)
    assert tp.flux == pytest.approx(godunov_flux_classical(BURGERS, 0.0, a, b), abs=1e-12)


def test_riemann_sample_is_self_similar(pair, conn):
    x = np.linspace(-2, 2, 41)
    np.testing.assert_array_equal(
        interface_riemann_sample(pair, conn, -1, 1, x, 1.0),
        interface_riemann_sample(pair, conn, -1, 1, 2 * x, 2.0),
    )


@settings(max_examples=200, deadline=None)
@given(states, states, states)
def test_flux_properties(a, b, c):
    pair, conn = cases.quadratic_pair()
    F = interface_flux_AB(pair, conn, a, b)
    assert F >= conn.gamma
    # raising a state below theta_l, or lowering one above theta_r, leaves F unchanged
    if a <= pair.theta_l and c <= pair.theta_l:
        assert interface_flux_AB(pair, conn, c, b) == F
    if b >= pair.theta_r and c >= pair.theta_r:
        assert interface_flux_AB(pair, conn, a, c) == F
    # nondecreasing in a, nonincreasing in b
    lo, hi = sorted((a, c))
    assert interface_flux_AB(pair, conn, lo, b) <= interface_flux_AB(pair, conn, hi, b)
    assert interface_flux_AB(pair, conn, a, lo) >= interface_flux_AB(pair, conn, a, hi)


@settings(max_examples=200, deadline=None)
@given(states, states)
def test_traces_are_admissible(a, b):
    pair, conn = cases.quadratic_pair()
    tp = interface_traces(pair, conn, a, b)
    assert pair.f_l(tp.u_l) == pytest.approx(tp.flux, abs=1e-9)
    assert pair.f_r(tp.u_r) == pytest.approx(tp.flux, abs=1e-9)
    assert classify_trace_pair(pair, conn, tp) != "inadmissible"
    if a <= pair.theta_l and b >= pair.theta_r:
        assert (tp.u_l, tp.u_r) == pytest.approx((conn.A, conn.B), abs=1e-12)
