"""Choosing initial data and a connection level to minimize an objective on the solution.

Controls are piecewise constant on a fixed partition of a bounded support K,
each value confined to an interval, plus the connection level gamma. The
search is a bounded Nelder-Mead run in unit-cube coordinates (bounds act as a
projection after every simplex move), restarted from seeded random points;
the last part of the evaluation budget goes to a projected compass search
from the incumbent, which walks linear and nearly linear objectives onto the
vertices a simplex tends to stall short of.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .flux import ConcaveAdapter, Connection, ValidatedFluxPair, connection_from_level
from .profile import Profile
from .solver import Field, Grid, evolve

DEFAULT_CELLS = 20
POLISH_SHARE = 0.25  # budget fraction kept for the compass search


class BudgetExhausted(Exception):
    """Raised internally to stop a local search when the evaluation budget is spent."""


@dataclass(frozen=True)
class AdmissibleSet:
    """Values allowed for the initial datum cell by cell, and the connection-level range.

    ``edges`` partitions the support K; outside K the datum is zero.
    """

    edges: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    gamma_range: tuple[float, float]

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        if lo.shape != (edges.size - 1,) or hi.shape != lo.shape:
            raise ValueError("need one value interval per cell")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("each cell needs a bounded interval lo <= hi")
        g_lo, g_hi = (float(g) for g in self.gamma_range)
        if g_lo > g_hi:
            raise ValueError("gamma range is empty")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "gamma_range", (g_lo, g_hi))

    @classmethod
    def from_boxes(
        cls,
        boxes,
        support: tuple[float, float],
        pair: ValidatedFluxPair,
        m: int = DEFAULT_CELLS,
        gamma_range: tuple[float, float] | None = None,
    ) -> "AdmissibleSet":
        """Cells over ``support``; a cell takes the intersection of the boxes covering its midpoint.

        ``boxes`` holds ((x0, x1), (lo, hi)) entries. Cells no box covers are
        pinned to zero. The default gamma range runs from the critical level
        to the smaller flux at the extreme admissible values, and collapses to
        the critical level when that is lower.
        """
        a, b = (float(v) for v in support)
        edges = np.linspace(a, b, int(m) + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        lo = np.full(mid.shape, -math.inf)
        hi = np.full(mid.shape, math.inf)
        covered = np.zeros(mid.shape, dtype=bool)
        for (x0, x1), (v0, v1) in boxes:
            inside = (mid >= x0) & (mid <= x1)
            covered |= inside
            lo[inside] = np.maximum(lo[inside], v0)
            hi[inside] = np.minimum(hi[inside], v1)
        lo[~covered] = 0.0
        hi[~covered] = 0.0
        if gamma_range is None:
            g_lo = pair.critical_level()
            g_hi = min(pair.f_l(float(lo.min())), pair.f_r(float(hi.max())))
            gamma_range = (g_lo, max(g_lo, g_hi))
        return cls(edges, lo, hi, gamma_range)

    @property
    def m(self) -> int:
        return self.lo.size

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "gamma_range": list(self.gamma_range),
        }


@dataclass(frozen=True)
class ControlVector:
    values: np.ndarray
    gamma: float

    def profile(self, admissible: AdmissibleSet) -> Profile:
        """Piecewise-constant datum on the support, zero outside it."""
        e, v = admissible.edges, np.asarray(self.values, dtype=float)
        pieces = [(e[i], e[i + 1], v[i], v[i]) for i in range(v.size)]
        return Profile(tuple(pieces), 0.0, 0.0)

    def to_dict(self) -> dict:
        return {"values": np.asarray(self.values).tolist(), "gamma": self.gamma}


@dataclass
class OptimizationResult:
    best: ControlVector
    J: float
    history: list  # (evaluation index, best J so far)
    evaluations: int
    starts: int = 1

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "J": self.J,
            "history": [list(h) for h in self.history],
            "evaluations": self.evaluations,
            "starts": self.starts,
        }


def project(v: ControlVector, admissible: AdmissibleSet) -> ControlVector:
    """Clamp every value into its interval and gamma into its range."""
    values = np.clip(np.asarray(v.values, dtype=float), admissible.lo, admissible.hi)
    g_lo, g_hi = admissible.gamma_range
    return ControlVector(values, float(min(max(v.gamma, g_lo), g_hi)))


# ---------------------------------------------------------------------------
# objectives


def _cell_values(profile, grid: Grid | None):
    if isinstance(profile, Field):
        return profile.final, profile.grid
    if isinstance(profile, Profile):
        if grid is None:
            raise ValueError("a Profile needs a grid to be sampled on")
        return profile(grid.centers), grid
    if grid is None:
        raise ValueError("cell values need their grid")
    return np.asarray(profile, dtype=float), grid


def objective_l2(profile, target: Profile, window: tuple[float, float], grid: Grid | None = None) -> float:
    """Integral over the window of |profile - target|^2, midpoint rule on the solver cells.

    ``profile`` may be a Field (its final state), a Profile, or cell values
    on ``grid``. Cells count with the part of them inside the window.
    """
    u, grid = _cell_values(profile, grid)
    a, b = window
    edges = grid.edges
    w = np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)
    x = grid.centers
    return float(np.sum(w * (u - target(x)) ** 2))


def objective_fuel(
    fld: Field,
    P,
    velocity: Callable | None = None,
    window: tuple[float, float] | None = None,
    adapter: ConcaveAdapter | None = None,
) -> float:
    """Space-time integral of rho * P(v(rho)): trapezoid rule over the stored time levels.

    ``P`` holds ascending polynomial coefficients. With an adapter the solver
    state is mapped back to density rho = -u and the default velocity is
    g(rho)/rho on each side (g'(0) at rho = 0); without one rho = u and a
    velocity map is required unless P is constant.
    """
    coeffs = np.asarray(P, dtype=float)
    grid = fld.grid
    x = grid.centers
    left = x < 0
    a, b = window if window is not None else (grid.edges[0], grid.edges[-1])
    w = np.clip(np.minimum(grid.edges[1:], b) - np.maximum(grid.edges[:-1], a), 0.0, None)

    def speed(rho):
        if velocity is not None:
            return velocity(rho, x)
        if adapter is None:
            if coeffs.size > 1:
                raise ValueError("a velocity map is needed unless P is constant")
            return np.zeros_like(rho)
        out = np.empty_like(rho)
        for g, mask in ((adapter.g_l, left), (adapter.g_r, ~left)):
            r = rho[mask]
            with np.errstate(divide="ignore", invalid="ignore"):
                out[mask] = np.where(r > 0, g(r) / np.where(r > 0, r, 1.0), g.d1(0.0))
        return out

    rates = []
    for u in fld.states:
        rho = adapter.to_density(u) if adapter is not None else np.asarray(u, dtype=float)
        rates.append(np.sum(w * rho * np.polynomial.polynomial.polyval(speed(rho), coeffs)))
    return float(np.trapezoid(rates, fld.times))


# ---------------------------------------------------------------------------
# search


@dataclass
class OptimizationProblem:
    pair: ValidatedFluxPair = field(repr=False)
    admissible: AdmissibleSet
    objective: Callable[[Field, Connection], float]  # J from the solution
    T: float
    grid: Grid
    budget: int = 2000
    seed: int = 0
    n_out: int = 0  # extra stored time levels, for time integrals
    restarts: int = 4
    polish: float = POLISH_SHARE
    x0: ControlVector | None = None
    cfl: float = 0.45


class _Evaluator:
    """Maps unit-cube points to controls, runs the solver and keeps the best so far."""

    def __init__(self, problem: OptimizationProblem):
        self.p = problem
        adm = problem.admissible
        self.free = np.flatnonzero(adm.hi > adm.lo)
        g_lo, g_hi = adm.gamma_range
        self.free_gamma = g_hi > g_lo
        self.dim = self.free.size + int(self.free_gamma)
        self.count = 0
        self.best_J = math.inf
        self.best = None
        self.history = []

    def control(self, z) -> ControlVector:
        adm = self.p.admissible
        z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
        values = adm.lo.copy()
        values[self.free] = adm.lo[self.free] + z[: self.free.size] * (adm.hi - adm.lo)[self.free]
        g_lo, g_hi = adm.gamma_range
        gamma = g_lo + z[-1] * (g_hi - g_lo) if self.free_gamma else g_lo
        return project(ControlVector(values, gamma), adm)

    def unit(self, v: ControlVector):
        adm = self.p.admissible
        span = (adm.hi - adm.lo)[self.free]
        z = (np.asarray(v.values)[self.free] - adm.lo[self.free]) / span
        if self.free_gamma:
            g_lo, g_hi = adm.gamma_range
            z = np.append(z, (v.gamma - g_lo) / (g_hi - g_lo))
        return np.clip(z, 0.0, 1.0)

    def evaluate(self, v: ControlVector) -> float:
        p = self.p
        conn = connection_from_level(p.pair, v.gamma)
        fld = evolve(v.profile(p.admissible), p.T, p.pair, conn, p.grid, cfl=p.cfl, n_out=p.n_out or None)
        return float(p.objective(fld, conn))

    def __call__(self, z) -> float:
        if self.count >= self.p.budget:
            raise BudgetExhausted
        v = self.control(z)
        J = self.evaluate(v)
        self.count += 1
        if J < self.best_J:
            self.best_J, self.best = J, v
        self.history.append((self.count, self.best_J))
        return J


def _compass(ev: _Evaluator, z, J: float, step: float = 0.25, min_step: float = 1e-6):
    """Projected coordinate search: accept the first improving move, halve the step when none."""
    z = np.asarray(z, dtype=float).copy()
    while step >= min_step:
        moved = False
        for i in range(z.size):
            for sign in (1.0, -1.0):
                trial = z.copy()
                trial[i] = min(max(z[i] + sign * step, 0.0), 1.0)
                if trial[i] == z[i]:
                    continue
                Jt = ev(trial)
                if Jt < J:
                    z, J, moved = trial, Jt, True
                    break
        if not moved:
            step *= 0.5
    return z, J


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Best control found within the budget; deterministic for a fixed seed."""
    if problem.budget < 1:
        raise ValueError("budget must be at least 1")
    ev = _Evaluator(problem)
    rng = np.random.default_rng(problem.seed)
    adm = problem.admissible
    if ev.dim == 0:
        ev(np.zeros(0))
        return OptimizationResult(ev.best, ev.best_J, ev.history, ev.count, 0)
    first = problem.x0 or ControlVector(0.5 * (adm.lo + adm.hi), 0.5 * sum(adm.gamma_range))
    simplex_budget = problem.budget - int(problem.polish * problem.budget)
    n_starts = 0
    try:
        while ev.count < simplex_budget:
            n_starts += 1
            if n_starts == 1:
                z0 = ev.unit(project(first, adm))
            elif n_starts % 2 == 0 and ev.best is not None:
                # alternate restarts from the incumbent with random ones
                z0 = ev.unit(ev.best)
            else:
                z0 = rng.uniform(0.0, 1.0, ev.dim)
            left = simplex_budget - ev.count
            share = left if n_starts >= problem.restarts else max(left // (problem.restarts - n_starts + 1), 4 * ev.dim)
            minimize(
                ev,
                z0,
                method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * ev.dim,
                options={"maxfev": int(min(share, left)), "xatol": 1e-6, "fatol": 1e-12, "adaptive": ev.dim > 4},
            )
        _compass(ev, ev.unit(ev.best), ev.best_J)
    except BudgetExhausted:
        pass
    return OptimizationResult(ev.best, ev.best_J, ev.history, ev.count, n_starts)


def l2_problem(
    pair: ValidatedFluxPair,
    admissible: AdmissibleSet,
    target: Profile,
    window: tuple[float, float],
    T: float,
    grid: Grid,
    **kwargs,
) -> OptimizationProblem:
    def J(fld, conn):
        return objective_l2(fld, target, window)

    return OptimizationProblem(pair, admissible, J, T, grid, **kwargs)


def fuel_problem(
    pair: ValidatedFluxPair,
    admissible: AdmissibleSet,
    P,
    T: float,
    grid: Grid,
    window: tuple[float, float] | None = None,
    adapter: ConcaveAdapter | None = None,
    velocity: Callable | None = None,
    n_out: int = 20,
    **kwargs,
) -> OptimizationProblem:
    def J(fld, conn):
        return objective_fuel(fld, P, velocity, window, adapter)

    return OptimizationProblem(pair, admissible, J, T, grid, n_out=n_out, **kwargs)
