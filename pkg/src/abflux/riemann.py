"""Riemann problems at a cell edge and at the flux interface x=0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flux import BelowMinimum, Connection, Flux, ValidatedFluxPair, branch_inverse, derivative_inverse

TRACE_TOL = 1e-9


class NoSolution(RuntimeError):
    """The brute-force oracle found no admissible trace pair on its grid."""


@dataclass(frozen=True)
class TracePair:
    u_l: float
    u_r: float
    flux: float

    def to_dict(self) -> dict:
        return {"u_l": self.u_l, "u_r": self.u_r, "flux": self.flux}

    @classmethod
    def from_dict(cls, d: dict) -> "TracePair":
        return cls(float(d["u_l"]), float(d["u_r"]), float(d["flux"]))


TRACE_CLASSES = ("AB", "T1", "T2", "T3minus", "T3plus", "inadmissible")


def godunov_flux_classical(f: Flux, theta: float, a, b):
    """Exact Riemann flux at x/t=0 for one convex flux with minimizer theta."""
    return np.maximum(f(np.maximum(a, theta)), f(np.minimum(b, theta)))


def interface_flux_AB(pair: ValidatedFluxPair, conn: Connection, a, b):
    """Flux through x=0: the larger of the connection level and both one-sided capacities."""
    left = pair.f_l(np.maximum(a, pair.theta_l))
    right = pair.f_r(np.minimum(b, pair.theta_r))
    return np.maximum(conn.gamma, np.maximum(left, right))


def interface_traces(pair: ValidatedFluxPair, conn: Connection, a: float, b: float) -> TracePair:
    F = float(interface_flux_AB(pair, conn, a, b))
    if a > pair.theta_l and F == pair.f_l(a):
        u_l = float(a)
    elif F == conn.gamma:
        u_l = conn.A
    else:
        u_l = branch_inverse(pair, "l", "-", F)
    if b < pair.theta_r and F == pair.f_r(b):
        u_r = float(b)
    elif F == conn.gamma:
        u_r = conn.B
    else:
        u_r = branch_inverse(pair, "r", "+", F)
    return TracePair(u_l, u_r, F)


# ---------------------------------------------------------------------------
# trace sets


def _pi_or_nan(pair, side, branch, level):
    try:
        return branch_inverse(pair, side, branch, level)
    except BelowMinimum:
        return float("nan")


def trace_set_tags(pair: ValidatedFluxPair, conn: Connection, u_l: float, u_r: float, tol: float = TRACE_TOL) -> list[str]:
    """All admissible-trace sets containing (u_l, u_r), checked with slack ``tol``.

    The sets describe one-sided limits of a profile at x=0; no flux balance is
    required here (see classify_trace_pair for that).
    """
    th_l, th_r = pair.theta_l, pair.theta_r
    fl, fr = pair.f_l, pair.f_r
    tags = []
    if abs(u_l - conn.A) <= tol and abs(u_r - conn.B) <= tol:
        tags.append("AB")
    pl_A = _pi_or_nan(pair, "l", "+", conn.gamma)  # pi_{l,+}(A)
    pr_B = _pi_or_nan(pair, "r", "-", conn.gamma)  # pi_{r,-}(B)
    # nan comparisons are False, so an undefined composition fails its inequality
    if u_l > th_l - tol and u_r > th_r - tol:
        up = _pi_or_nan(pair, "r", "+", fl(u_l))
        if u_l >= pl_A - tol and conn.B - tol <= u_r <= up + tol:
            tags.append("T1")
    if u_l < th_l + tol and u_r < th_r + tol:
        lo = _pi_or_nan(pair, "l", "-", fr(u_r))
        if lo - tol <= u_l <= conn.A + tol and u_r <= pr_B + tol:
            tags.append("T2")
    if u_l >= th_l - tol and u_r < th_r + tol:
        hi = _pi_or_nan(pair, "l", "+", fr(u_r))
        if pl_A - tol <= u_l <= hi + tol and u_r <= pr_B + tol:
            tags.append("T3minus")
    if u_l > th_l - tol and u_r <= th_r + tol:
        lo = _pi_or_nan(pair, "r", "-", fl(u_l))
        if u_l >= pl_A - tol and lo - tol <= u_r <= pr_B + tol:
            tags.append("T3plus")
    return tags


def classify_trace_pair(pair: ValidatedFluxPair, conn: Connection, tp: TracePair, tol: float = TRACE_TOL) -> str:
    fl, fr = pair.f_l(tp.u_l), pair.f_r(tp.u_r)
    scale = 1.0 + abs(fl)
    if abs(fl - fr) > tol * scale or min(fl, fr) < conn.gamma - tol * scale:
        return "inadmissible"
    tags = trace_set_tags(pair, conn, tp.u_l, tp.u_r, tol)
    return tags[0] if tags else "inadmissible"


# ---------------------------------------------------------------------------
# brute-force oracle


def _left_reachable(f, theta, a, u, tol):
    """u is a left trace reachable from state a by waves of non-positive speed."""
    same = np.abs(u - a) <= tol
    shock = (u < a) & (f(u) > f(a) + tol)  # Lax shock a -> u, strictly negative speed
    fan = (u > a) & (u <= theta + tol)  # rarefaction a -> u, fastest ray f'(u) <= 0
    return same | shock | fan


def _right_reachable(f, theta, b, u, tol):
    same = np.abs(u - b) <= tol
    shock = (u > b) & (f(u) > f(b) + tol)
    fan = (u < b) & (u >= theta - tol)
    return same | shock | fan


def _partners(pair, states):
    """Same-flux partners of the given states, on both sides and both branches."""
    fl, fr = pair.f_l, pair.f_r
    cand_l, cand_r = [], []
    lev = fl(states)
    ok = lev >= pair.minimum("r")
    for branch in "-+":
        cand_l.append(states[ok])
        cand_r.append(branch_inverse(pair, "r", branch, lev[ok]))
    lev = fr(states)
    ok = lev >= pair.minimum("l")
    for branch in "-+":
        cand_l.append(branch_inverse(pair, "l", branch, lev[ok]))
        cand_r.append(states[ok])
    return np.concatenate(cand_l), np.concatenate(cand_r)


class RiemannOracle:
    """Trace pair at x=0 by exhaustive search over candidate wave fans.

    Candidates are every grid state (plus the data, the connection states and
    the minimizers) on one side, paired with the states on the other side that
    carry the same flux. A candidate survives when it is reachable from the
    data by admissible one-sided waves that do not enter the other half-line
    and it satisfies the interface entropy condition. Among survivors the one
    with the smallest flux is returned (exact arithmetic leaves a single one;
    ties come from grid states sitting on a wave boundary).

    Grid partners are computed once, so one oracle can answer many queries.
    """

    def __init__(self, pair: ValidatedFluxPair, conn: Connection, u_grid):
        self.pair, self.conn = pair, conn
        fixed = np.unique(np.concatenate([np.asarray(u_grid, float), [conn.A, conn.B, pair.theta_l, pair.theta_r]]))
        ul, ur = _partners(pair, fixed)
        self._ul = np.concatenate([ul, [conn.A]])
        self._ur = np.concatenate([ur, [conn.B]])

    def __call__(self, a: float, b: float) -> TracePair:
        pair, conn = self.pair, self.conn
        fl, fr = pair.f_l, pair.f_r
        extra_l, extra_r = _partners(pair, np.array([a, b], dtype=float))
        ul = np.concatenate([self._ul, extra_l])
        ur = np.concatenate([self._ur, extra_r])
        flux = fl(ul)

        tol = 1e-12 * (1.0 + abs(a) + abs(b))
        keep = _left_reachable(fl, pair.theta_l, a, ul, tol) & _right_reachable(fr, pair.theta_r, b, ur, tol)
        keep &= flux >= conn.gamma - tol
        diverging = (ul <= pair.theta_l + tol) & (ur >= pair.theta_r - tol)
        is_ab = (np.abs(ul - conn.A) <= tol) & (np.abs(ur - conn.B) <= tol)
        keep &= ~diverging | is_ab
        if not keep.any():
            raise NoSolution(f"no admissible trace pair for (a, b) = ({a}, {b})")
        idx = np.flatnonzero(keep)
        best = idx[np.argmin(flux[idx])]
        return TracePair(float(ul[best]), float(ur[best]), float(flux[best]))


def riemann_oracle(pair: ValidatedFluxPair, conn: Connection, a: float, b: float, u_grid) -> TracePair:
    return RiemannOracle(pair, conn, u_grid)(a, b)


# ---------------------------------------------------------------------------
# exact solutions (reference values for convergence tests)


def classical_riemann_sample(f: Flux, a: float, b: float, xi):
    """Entropy solution of the classical Riemann problem (a, b) at similarity variable xi = x/t."""
    xi = np.asarray(xi, dtype=float)
    if a > b:
        s = (f(a) - f(b)) / (a - b)
        return np.where(xi < s, a, b)
    if a == b:
        return np.full_like(xi, a)
    lo, hi = f.d1(a), f.d1(b)
    out = np.where(xi <= lo, a, b)
    fan = (xi > lo) & (xi < hi)
    if fan.any():
        out[fan] = derivative_inverse(f, xi[fan], lo=a, hi=b)
    return out


def interface_riemann_sample(pair: ValidatedFluxPair, conn: Connection, a: float, b: float, x, t: float):
    """Exact solution of the interface Riemann problem at time t > 0."""
    x = np.asarray(x, dtype=float)
    tp = interface_traces(pair, conn, a, b)
    xi = x / t
    left = classical_riemann_sample(pair.f_l, a, tp.u_l, xi)
    right = classical_riemann_sample(pair.f_r, tp.u_r, b, xi)
    return np.where(x < 0, left, right)
