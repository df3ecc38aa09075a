import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abflux import PolyFlux, SplineFlux, adapt_concave, connection_from_level, greenshields, validate_flux_pair
from abflux.flux import (
    BelowMinimum,
    FluxError,
    NoCrossing,
    NonConcave,
    NonConvex,
    bisect_increasing,
    branch_inverse,
    critical_connection,
    is_connection,
    make_connection,
    pi_map,
)

import cases


def test_validation_of_quadratic_pair(pair):
    assert pair.theta_l == pytest.approx(0.0, abs=1e-12)
    assert pair.theta_r == pytest.approx(0.25, abs=1e-12)
    assert pair.c == pytest.approx(1.0, abs=1e-12)
    assert pair.crossings == pytest.approx((0.0, 1.0), abs=1e-12)
    assert pair.critical_level() == pytest.approx(0.0, abs=1e-15)


def test_identical_fluxes_need_the_flag():
    f = PolyFlux([0, 0, 0.5])
    with pytest.raises(NoCrossing):
        validate_flux_pair(f, f, (-3, 3))
    assert validate_flux_pair(f, f, (-3, 3), identical=True).identical


def test_nonconvex_flux_rejected():
    with pytest.raises(NonConvex):
        validate_flux_pair(PolyFlux([0, 0, 0, 1]), PolyFlux([0, 0, 0.5]), (-1, 1))


def test_branch_inverse_examples(pair):
    assert branch_inverse(pair, "l", "-", 0.125) == pytest.approx(-0.5, abs=1e-12)
    assert branch_inverse(pair, "r", "+", 0.0) == pytest.approx(0.5, abs=1e-12)
    assert branch_inverse(pair, "l", "+", 0.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(BelowMinimum):
        branch_inverse(pair, "r", "-", -1.0)


def test_branch_inverse_vectorized_matches_scalar(pair):
    ys = np.linspace(0, 2, 9)
    vec = branch_inverse(pair, "r", "-", ys)
    np.testing.assert_allclose(vec, [branch_inverse(pair, "r", "-", y) for y in ys], atol=1e-12)
    # closed form of the minus branch of u^2 - u/2
    np.testing.assert_allclose(vec, (0.5 - np.sqrt(0.25 + 4 * ys)) / 2, atol=1e-11)


def test_pi_map_examples(pair):
    assert pi_map(pair, "l+", -1.0) == pytest.approx(1.0, abs=1e-12)
    assert pi_map(pair, "r-", 1.0) == pytest.approx(-0.5, abs=1e-12)
    assert pi_map(pair, "r+^l", 0.0) == pytest.approx(0.5, abs=1e-12)


def test_connection_from_level(pair):
    c0 = connection_from_level(pair, 0.0)
    assert (c0.A, c0.B) == pytest.approx((0.0, 0.5), abs=1e-12)
    c = connection_from_level(pair, 0.125)
    assert c.A == -0.5
    assert c.B == pytest.approx(cases.B, abs=1e-12)
    with pytest.raises(BelowMinimum):
        connection_from_level(pair, -0.1)


def test_make_connection_checks_the_level(pair):
    assert make_connection(pair, cases.A, cases.B).gamma == pytest.approx(0.125)
    with pytest.raises(FluxError):
        make_connection(pair, -0.5, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3.0))
def test_connection_levels_agree(gamma):
    pair, _ = cases.quadratic_pair()
    c = connection_from_level(pair, gamma)
    assert is_connection(pair, c.A, c.B, tol=1e-10)
    assert pair.f_l(c.A) == pytest.approx(gamma, abs=1e-10)
    assert pair.f_r(c.B) == pytest.approx(gamma, abs=1e-10)
    assert c.A <= pair.theta_l and c.B >= pair.theta_r


def test_bisection_reaches_tolerance():
    root = bisect_increasing(lambda u: u**3, -1.0, 2.0, 0.5)
    assert root == pytest.approx(0.5 ** (1 / 3), abs=1e-12)


def test_adapt_concave_reflects_greenshields():
    pair, adapter = adapt_concave(PolyFlux([0, 1, -1]), PolyFlux([0, 1, -1]), 1.0)
    assert pair.identical
    assert pair.f_l.coeffs == (0.0, 1.0, 1.0)
    assert pair.theta_l == pytest.approx(-0.5, abs=1e-12)
    assert adapter.to_state(0.3) == -0.3 and adapter.to_density(-0.3) == 0.3


def test_concave_connection_maps_to_convex():
    g_l = greenshields(1.0, 1.0)
    g_r = PolyFlux([0, 0.24 / 0.21, -0.24 / 0.21])
    pair, adapter = adapt_concave(g_l, g_r, 1.0)
    c = adapter.connection(pair, 0.6, 0.3)
    assert (c.A, c.B) == pytest.approx((-0.6, -0.3), abs=1e-12)
    assert adapter.gamma_to_level(c.gamma) == pytest.approx(0.24, abs=1e-12)


def test_convex_flux_rejected_as_traffic_flux():
    with pytest.raises(NonConcave):
        adapt_concave(PolyFlux([0, 0, 1]), greenshields(1, 1), 1.0)


def test_spline_flux_tracks_polynomial():
    xs = np.linspace(-3, 3, 61)
    spline = SplineFlux(xs, 0.5 * xs**2)
    u = np.linspace(-2.9, 2.9, 37)
    np.testing.assert_allclose(spline(u), 0.5 * u**2, atol=1e-10)
    np.testing.assert_allclose(spline.d1(u), u, atol=1e-7)
    np.testing.assert_allclose(spline.d2(u), 1.0, atol=1e-4)
    # the Taylor continuation stays convex outside the table
    assert spline(4.0) == pytest.approx(8.0, abs=1e-8)


def test_spline_pair_matches_polynomial_pair():
    xs = np.linspace(-3, 3, 121)
    sp = validate_flux_pair(SplineFlux(xs, 0.5 * xs**2), SplineFlux(xs, xs**2 - 0.5 * xs), (-3, 3))
    c = connection_from_level(sp, 0.125)
    assert (c.A, c.B) == pytest.approx((cases.A, cases.B), abs=1e-8)


def test_critical_connection_of_identical_pair(same):
    pair, conn = same
    assert conn.A == pytest.approx(0.0, abs=1e-12) and conn.B == pytest.approx(0.0, abs=1e-12)
    assert critical_connection(pair).gamma == pytest.approx(0.0, abs=1e-15)


def test_pair_to_dict_roundtrip(pair):
    d = pair.to_dict()
    assert d["fl"] == {"poly": [0.0, 0.0, 0.5]}
    assert d["range"] == [-3, 3] and not d["identical"]
    assert math.isclose(pair.f_r(1.0), 0.5)
