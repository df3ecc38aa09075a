"""First-order Godunov scheme on an interface-aligned grid."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _godunov_py
from .flux import BelowMinimum, Connection, PolyFlux, ValidatedFluxPair, branch_inverse
from .profile import Profile
from .riemann import TracePair, interface_flux_AB, interface_traces

try:
    if os.environ.get("ABFLUX_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _godunov_core
except ImportError:  # pragma: no cover - depends on the build
    _godunov_core = None

BACKEND = "compiled" if _godunov_core is not None else "python"
DEFAULT_CFL = 0.45


class BadDomain(ValueError):
    pass


class CFLViolation(ValueError):
    pass


class NonFinite(FloatingPointError):
    pass


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int
    dx: float
    interface_edge: int
    shift: float = 0.0

    @property
    def edges(self) -> np.ndarray:
        return (np.arange(self.n_cells + 1) - self.interface_edge) * self.dx

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) - self.interface_edge + 0.5) * self.dx

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_cells": self.n_cells,
            "dx": self.dx,
            "interface_edge": self.interface_edge,
            "shift": self.shift,
        }


def make_grid(x_min: float, x_max: float, n_cells: int) -> Grid:
    """Uniform grid with x=0 on a cell edge; x_min moves by less than dx/2 if needed."""
    x_min, x_max, n_cells = float(x_min), float(x_max), int(n_cells)
    if not (x_min < 0 < x_max) or n_cells < 2:
        raise BadDomain(f"need x_min < 0 < x_max and at least 2 cells, got ({x_min}, {x_max}, {n_cells})")
    dx = (x_max - x_min) / n_cells
    k = int(round(-x_min / dx))
    if k <= 0 or k >= n_cells:
        raise BadDomain("domain too lopsided: the interface does not fall inside the grid")
    new_min = -k * dx
    return Grid(new_min, new_min + n_cells * dx, n_cells, dx, k, shift=new_min - x_min)


def grid_with_spacing(x_min: float, x_max: float, dx: float) -> Grid:
    """Smallest interface-aligned grid of spacing dx covering [x_min, x_max]."""
    if not (x_min < 0 < x_max):
        raise BadDomain(f"need x_min < 0 < x_max, got ({x_min}, {x_max})")
    k = int(math.ceil(-x_min / dx - 1e-9))
    m = int(math.ceil(x_max / dx - 1e-9))
    return Grid(-k * dx, m * dx, k + m, dx, k, shift=-k * dx - x_min)


def padded_grid(grid: Grid, width: float) -> Grid:
    """Same spacing, extended by at least ``width`` on both sides."""
    extra = int(math.ceil(width / grid.dx - 1e-9)) + 1
    k = grid.interface_edge + extra
    n = grid.n_cells + 2 * extra
    return Grid(-k * grid.dx, (n - k) * grid.dx, n, grid.dx, k, shift=grid.shift)


@dataclass
class Field:
    grid: Grid
    times: np.ndarray
    states: np.ndarray
    trace_history: list
    pair: ValidatedFluxPair = field(repr=False)
    conn: Connection
    diagnostics: dict = field(default_factory=dict)
    exact: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.states[i]

    def profile_at(self, t: float) -> Profile:
        """Piecewise-linear profile through the cell averages.

        The one-sided values at x=0 are the traces of the interface Riemann
        problem between the two adjacent cells.
        """
        s = self.state_at(t)
        k = self.grid.interface_edge
        tp = interface_traces(self.pair, self.conn, s[k - 1], s[k])
        return Profile.from_cells(self.grid.centers, s, self.grid.dx, traces=(tp.u_l, tp.u_r))

    def final_profile(self) -> Profile:
        return self.profile_at(self.times[-1])

    def summary(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "times": self.times.tolist(),
            "exact": self.exact,
            "diagnostics": self.diagnostics,
            "trace_history": [dict(t=float(t), **tp.to_dict()) for t, tp in zip(self.times, self.trace_history)],
        }


def mass(state, grid: Grid) -> float:
    return float(np.sum(state) * grid.dx)


def invariant_interval(pair: ValidatedFluxPair, conn: Connection, lo: float, hi: float) -> tuple[float, float]:
    """Values any solution can take when the data and (A, B) lie in [lo, hi]."""
    a = min(lo, conn.A, conn.B, pair.theta_r)
    b = max(hi, conn.A, conn.B, pair.theta_l)
    try:
        a_img = branch_inverse(pair, "l", "-", pair.f_r(a))
    except BelowMinimum:
        a_img = a
    try:
        b_img = branch_inverse(pair, "r", "+", pair.f_l(b))
    except BelowMinimum:
        b_img = b
    return min(a, a_img), max(b, b_img)


def side_intervals(pair: ValidatedFluxPair, conn: Connection, lo: float, hi: float):
    """Value ranges of the left and right half-lines; their union is the invariant interval.

    Interface traces on the left are either left values or lie on the
    decreasing branch (below theta_l <= hi), so the left side never exceeds
    hi; symmetrically the right side never drops below lo.
    """
    a, b = invariant_interval(pair, conn, lo, hi)
    lo_all = min(lo, conn.A, conn.B, pair.theta_r)
    hi_all = max(hi, conn.A, conn.B, pair.theta_l)
    return (a, hi_all), (lo_all, b)


def max_speed(pair: ValidatedFluxPair, left: tuple, right: tuple) -> float:
    # f' is monotone, so the endpoints carry the extremes
    speeds = [abs(pair.f_l.d1(v)) for v in left] + [abs(pair.f_r.d1(v)) for v in right]
    return max(max(speeds), 1e-12)


def _stepper(pair: ValidatedFluxPair, conn: Connection, k: int, backend: str | None):
    backend = backend or BACKEND
    use_core = (
        backend == "compiled"
        and _godunov_core is not None
        and isinstance(pair.f_l, PolyFlux)
        and isinstance(pair.f_r, PolyFlux)
    )
    if use_core:
        cl = np.array(pair.f_l.coeffs, dtype=float)
        cr = np.array(pair.f_r.coeffs, dtype=float)

        def run(u, lam, nsteps):
            return _godunov_core.run_steps(u, cl, cr, pair.theta_l, pair.theta_r, conn.gamma, k, lam, nsteps)

        return run, "compiled"

    def run(u, lam, nsteps):
        return _godunov_py.run_steps(u, pair.f_l, pair.f_r, pair.theta_l, pair.theta_r, conn.gamma, k, lam, nsteps)

    return run, "python"


def _band_tv(u, k, width=4):
    lo, hi = max(k - width, 0), min(k + width, u.size)
    return float(np.sum(np.abs(np.diff(u[lo:hi]))))


def evolve(
    u0,
    T: float,
    pair: ValidatedFluxPair,
    conn: Connection,
    grid: Grid,
    cfl: float = DEFAULT_CFL,
    output_times=None,
    n_out: int | None = None,
    dt: float | None = None,
    backend: str | None = None,
) -> Field:
    """Approximate the solution at the requested times; t=T is always stored exactly."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    T = float(T)
    if isinstance(u0, Profile):
        u = u0.cell_averages(grid.edges)
    else:
        u = np.array(u0, dtype=float)
    if u.shape != (grid.n_cells,):
        raise ValueError(f"initial state has shape {u.shape}, grid has {grid.n_cells} cells")
    if not np.all(np.isfinite(u)):
        raise NonFinite("initial state is not finite")

    lo, hi = float(u.min()), float(u.max())
    bounds = invariant_interval(pair, conn, lo, hi)
    s_max = max_speed(pair, *side_intervals(pair, conn, lo, hi))
    dt_cfl = cfl * grid.dx / s_max
    if dt is not None:
        if dt * s_max / grid.dx > 1.0 + 1e-12:
            raise CFLViolation(f"dt={dt} gives Courant number {dt * s_max / grid.dx:.3f} > 1")
        step = float(dt)
    else:
        step = dt_cfl

    times = {0.0, T}
    if output_times is not None:
        times.update(float(t) for t in output_times if 0 <= t <= T)
    if n_out:
        times.update(np.linspace(0.0, T, int(n_out) + 1).tolist())
    times = np.array(sorted(times))

    k = grid.interface_edge
    run, used = _stepper(pair, conn, k, backend)
    lam = step / grid.dx
    states = [u.copy()]
    traces = [interface_traces(pair, conn, u[k - 1], u[k])]
    tv = [_band_tv(u, k)]
    flux_min = math.inf
    n_steps = 0
    t = 0.0
    for target in times[1:]:
        span = target - t
        full = int(math.floor(span / step * (1 + 1e-12)))
        if full:
            flux_min = min(flux_min, run(u, lam, full))
            n_steps += full
        rest = span - full * step
        if rest > 1e-14 * max(T, 1.0):
            flux_min = min(flux_min, run(u, rest / grid.dx, 1))
            n_steps += 1
        t = target
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"non-finite state at t={t}")
        states.append(u.copy())
        traces.append(interface_traces(pair, conn, u[k - 1], u[k]))
        tv.append(_band_tv(u, k))

    states = np.array(states)
    diagnostics = {
        "backend": used,
        "cfl": cfl,
        "dt": step,
        "steps": n_steps,
        "s_max": s_max,
        "invariant_interval": list(bounds),
        "interface_flux_min": flux_min if n_steps else float(interface_flux_AB(pair, conn, u[k - 1], u[k])),
        "mass": [mass(s, grid) for s in states],
        "linf": [float(np.max(np.abs(s))) for s in states],
        "interface_band_tv": tv,
    }
    return Field(grid, times, states, traces, pair, conn, diagnostics)


def interface_trace_history(fld: Field, band: int = 1) -> list[tuple[float, TracePair]]:
    """Trace estimates read ``band`` cells away from x=0, with the interface flux of the adjacent cells."""
    if band < 1:
        raise ValueError("band must be at least 1")
    k = fld.grid.interface_edge
    out = []
    for t, s in zip(fld.times, fld.states):
        F = float(interface_flux_AB(fld.pair, fld.conn, s[k - 1], s[k]))
        out.append((float(t), TracePair(float(s[k - band]), float(s[k + band - 1]), F)))
    return out
