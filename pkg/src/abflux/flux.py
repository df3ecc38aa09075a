"""Flux pairs, connections, branch inverses and the concave (LWR) adapter."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


class FluxError(ValueError):
    """Base class for invalid flux data."""


class NonConvex(FluxError):
    pass


class NonConcave(FluxError):
    pass


class NoCrossing(FluxError):
    pass


class OrderViolation(FluxError):
    pass


class BelowMinimum(FluxError):
    """A flux level below the minimum of the branch being inverted."""


N_VALIDATION_SAMPLES = 10_000
_MAX_BISECTIONS = 200


def _scalarize(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


# ---------------------------------------------------------------------------
# flux representations


class Flux(ABC):
    """A scalar map with first and second derivatives, vectorized over numpy arrays."""

    @abstractmethod
    def __call__(self, u): ...

    @abstractmethod
    def d1(self, u): ...

    @abstractmethod
    def d2(self, u): ...

    def to_dict(self) -> dict:
        raise NotImplementedError


class PolyFlux(Flux):
    """Polynomial flux with ascending coefficients a0 + a1 u + a2 u^2 + ..."""

    def __init__(self, coeffs):
        c = [float(a) for a in coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        self.coeffs = tuple(c)
        self._d1 = tuple(k * a for k, a in enumerate(c))[1:] or (0.0,)
        self._d2 = tuple(k * a for k, a in enumerate(self._d1))[1:] or (0.0,)

    @staticmethod
    def _horner(coeffs, u):
        u = np.asarray(u, dtype=float) if not np.isscalar(u) else float(u)
        acc = coeffs[-1]
        for a in coeffs[-2::-1]:
            acc = acc * u + a
        if np.ndim(u) and np.ndim(acc) == 0:
            acc = np.full(np.shape(u), acc)
        return acc

    def __call__(self, u):
        return self._horner(self.coeffs, u)

    def d1(self, u):
        return self._horner(self._d1, u)

    def d2(self, u):
        return self._horner(self._d2, u)

    def reflected(self) -> "PolyFlux":
        """Coefficients of u -> -p(-u)."""
        return PolyFlux([-a * (-1) ** k for k, a in enumerate(self.coeffs)])

    def to_dict(self):
        return {"poly": list(self.coeffs)}

    def __repr__(self):
        return f"PolyFlux({list(self.coeffs)})"

    def __eq__(self, other):
        return isinstance(other, PolyFlux) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)


class SplineFlux(Flux):
    """Tabulated flux through a cubic spline.

    Outside the table the spline is continued by its second-order Taylor
    polynomial at the nearest end, so convexity survives the extension.
    Derivatives are central finite differences.
    """

    H1 = 1e-6
    H2 = 1e-4

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.ndim != 1 or self.xs.size < 4 or np.any(np.diff(self.xs) <= 0):
            raise FluxError("spline table needs at least 4 strictly increasing nodes")
        self._spline = CubicSpline(self.xs, self.ys)
        lo, hi = self.xs[0], self.xs[-1]
        self._ends = [
            (e, float(self._spline(e)), float(self._spline(e, 1)), float(self._spline(e, 2)))
            for e in (lo, hi)
        ]

    def _eval(self, u):
        u = np.asarray(u, dtype=float)
        out = np.asarray(self._spline(np.clip(u, self.xs[0], self.xs[-1])), dtype=float)
        for (e, v, d, dd), mask in zip(self._ends, (u < self.xs[0], u > self.xs[-1])):
            if np.any(mask):
                du = u[mask] - e
                out[mask] = v + d * du + 0.5 * dd * du * du
        return out

    def __call__(self, u):
        return _scalarize(self._eval(u), u)

    def d1(self, u):
        h = self.H1
        return _scalarize((self._eval(np.asarray(u) + h) - self._eval(np.asarray(u) - h)) / (2 * h), u)

    def d2(self, u):
        h = self.H2
        uu = np.asarray(u, dtype=float)
        return _scalarize((self._eval(uu + h) - 2 * self._eval(uu) + self._eval(uu - h)) / (h * h), u)

    def to_dict(self):
        return {"spline": {"x": self.xs.tolist(), "y": self.ys.tolist()}}


class ReflectedFlux(Flux):
    """u -> -g(-u) for an arbitrary flux g."""

    def __init__(self, g: Flux):
        self.g = g

    def __call__(self, u):
        return -self.g(-np.asarray(u) if not np.isscalar(u) else -u)

    def d1(self, u):
        return self.g.d1(-np.asarray(u) if not np.isscalar(u) else -u)

    def d2(self, u):
        return -self.g.d2(-np.asarray(u) if not np.isscalar(u) else -u)


def flux_from_dict(d: dict) -> Flux:
    if "poly" in d:
        return PolyFlux(d["poly"])
    if "spline" in d:
        return SplineFlux(d["spline"]["x"], d["spline"]["y"])
    raise FluxError(f"unknown flux description: {sorted(d)}")


# ---------------------------------------------------------------------------
# monotone root finding


def bisect_increasing(fun, lo, hi, target=0.0):
    """Solve fun(u) = target for a nondecreasing fun on [lo, hi], elementwise.

    Runs until the bracket is a few ulps wide (relative to max(1, |u|)), far
    below the 1e-12 state tolerance the rest of the package relies on.
    """
    scalar = np.ndim(lo) == 0 and np.ndim(hi) == 0 and np.ndim(target) == 0
    if scalar:
        return _bisect_scalar(fun, float(lo), float(hi), float(target))
    lo = np.array(lo, dtype=float, ndmin=1)
    hi = np.array(hi, dtype=float, ndmin=1)
    target = np.broadcast_to(np.asarray(target, dtype=float), np.broadcast(lo, hi).shape)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
        active = (mid > lo) & (mid < hi) & (hi - lo > 4e-16 * scale)
        if not active.any():
            break
        above = np.asarray(fun(mid)) >= target
        hi = np.where(active & above, mid, hi)
        lo = np.where(active & ~above, mid, lo)
    return 0.5 * (lo + hi)


def _bisect_scalar(fun, lo, hi, target):
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or hi - lo <= 4e-16 * max(1.0, abs(lo), abs(hi)):
            break
        if fun(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _expand_bracket(fun, start, target, direction, increasing):
    """Walk away from ``start`` until fun crosses ``target``; returns the far end."""
    if np.ndim(start) == 0 and np.ndim(target) == 0:
        start, target = float(start), float(target)
        width = max(1.0, abs(start))
        for _ in range(200):
            far = start + direction * width
            val = fun(far)
            if (val >= target) if increasing else (val <= target):
                return far
            width *= 2
        raise FluxError("could not bracket root: flux does not grow fast enough")
    start = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    width = np.broadcast_to(np.maximum(1.0, np.abs(start)), np.broadcast(start, target).shape).copy()
    far = start + direction * width
    for _ in range(200):
        val = np.asarray(fun(far))
        done = val >= target if increasing else val <= target
        if np.all(done):
            return far
        width = np.where(done, width, 2 * width)
        far = start + direction * width
    raise FluxError("could not bracket root: flux does not grow fast enough")


def derivative_inverse(f: Flux, s, lo: float | None = None, hi: float | None = None):
    """Solve f'(u) = s for a strictly convex flux (f' is increasing)."""
    if np.ndim(s) == 0:
        s = float(s)
        lo_b = _expand_bracket(f.d1, 0.0, s, -1.0, increasing=False) if lo is None else lo
        hi_b = _expand_bracket(f.d1, 0.0, s, +1.0, increasing=True) if hi is None else hi
        return bisect_increasing(f.d1, lo_b, hi_b, s)
    s_arr = np.asarray(s, dtype=float)
    anchor = np.zeros_like(s_arr)
    lo_b = _expand_bracket(f.d1, anchor, s_arr, -1.0, increasing=False) if lo is None else np.full_like(s_arr, lo)
    hi_b = _expand_bracket(f.d1, anchor, s_arr, +1.0, increasing=True) if hi is None else np.full_like(s_arr, hi)
    out = bisect_increasing(f.d1, lo_b, hi_b, s_arr)
    return _scalarize(out, s)


# ---------------------------------------------------------------------------
# validated pair and connections


def _side(side: str) -> str:
    s = side.lower()
    if s in ("l", "left"):
        return "l"
    if s in ("r", "right"):
        return "r"
    raise ValueError(f"side must be left or right, got {side!r}")


def _branch(branch: str) -> str:
    b = branch.lower()
    if b in ("-", "minus", "m"):
        return "-"
    if b in ("+", "plus", "p"):
        return "+"
    raise ValueError(f"branch must be minus or plus, got {branch!r}")


@dataclass(frozen=True, eq=False)
class ValidatedFluxPair:
    f_l: Flux
    f_r: Flux
    theta_l: float
    theta_r: float
    c: float
    crossings: tuple[float, float]
    eval_range: tuple[float, float]
    identical: bool = False

    def flux(self, side: str) -> Flux:
        return self.f_l if _side(side) == "l" else self.f_r

    def theta(self, side: str) -> float:
        return self.theta_l if _side(side) == "l" else self.theta_r

    def minimum(self, side: str) -> float:
        return float(self.flux(side)(self.theta(side)))

    def inverse(self, side: str, branch: str, y):
        return branch_inverse(self, side, branch, y)

    def pi(self, kind: str, u):
        return pi_map(self, kind, u)

    def critical_level(self) -> float:
        return max(self.minimum("l"), self.minimum("r"))

    def to_dict(self) -> dict:
        return {
            "fl": self.f_l.to_dict(),
            "fr": self.f_r.to_dict(),
            "range": list(self.eval_range),
            "identical": self.identical,
        }


@dataclass(frozen=True)
class Connection:
    A: float
    B: float
    gamma: float

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "gamma": self.gamma}


def _find_crossings(d, xs) -> list[float]:
    vals = d(xs)
    scale = 1e-14 * (1.0 + np.abs(vals).max())
    sign = np.where(np.abs(vals) <= scale, 0, np.sign(vals)).astype(int)
    roots: list[float] = []
    nz = np.flatnonzero(sign)
    for i in np.flatnonzero(sign == 0):
        # exact zero sitting between opposite signs (or at an end of the range)
        before = nz[nz < i]
        after = nz[nz > i]
        if not before.size or not after.size or sign[before[-1]] != sign[after[0]]:
            roots.append(float(xs[i]))
    for i, j in zip(nz[:-1], nz[1:]):
        if j == i + 1 and sign[i] != sign[j]:
            s = sign[j]
            roots.append(bisect_increasing(lambda u: s * d(u), xs[i], xs[j]))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > 1e-9:
            merged.append(r)
    return merged


def validate_flux_pair(f_l: Flux, f_r: Flux, eval_range, identical: bool = False) -> ValidatedFluxPair:
    lo, hi = (float(v) for v in eval_range)
    if not lo < hi:
        raise FluxError("empty evaluation range")
    xs = np.linspace(lo, hi, N_VALIDATION_SAMPLES)
    c_l = float(np.min(f_l.d2(xs)))
    c_r = float(np.min(f_r.d2(xs)))
    if c_l <= 0 or c_r <= 0:
        bad = "left" if c_l <= 0 else "right"
        raise NonConvex(f"{bad} flux has f'' <= 0 somewhere on [{lo}, {hi}]")

    thetas = []
    for f, name in ((f_l, "left"), (f_r, "right")):
        if f.d1(lo) > 0 or f.d1(hi) < 0:
            raise FluxError(f"{name} minimizer is not inside [{lo}, {hi}]")
        thetas.append(bisect_increasing(f.d1, lo, hi))
    theta_l, theta_r = thetas

    def diff(u):
        return f_l(u) - f_r(u)

    same = bool(np.all(np.abs(diff(xs)) <= 1e-14 * (1.0 + np.abs(f_l(xs)))))
    if same:
        if not identical:
            raise NoCrossing("fluxes coincide everywhere; pass identical=True to allow it")
        crossings = (lo, hi)
        theta_r = theta_l
    else:
        roots = _find_crossings(diff, xs)
        if len(roots) < 2:
            raise NoCrossing(f"found {len(roots)} crossing(s) of f_l and f_r, need two")
        if len(roots) > 2:
            raise NoCrossing(f"found {len(roots)} crossings of f_l and f_r, expected exactly two")
        crossings = (roots[0], roots[1])
        tol = 1e-12 * (1 + abs(theta_l) + abs(theta_r))
        if theta_l < crossings[0] - tol or theta_r > crossings[1] + tol:
            raise OrderViolation(
                f"need theta_l >= u0 and theta_r <= u1, got theta_l={theta_l}, theta_r={theta_r}, crossings={crossings}"
            )
    return ValidatedFluxPair(
        f_l=f_l,
        f_r=f_r,
        theta_l=theta_l,
        theta_r=theta_r,
        c=min(c_l, c_r),
        crossings=crossings,
        eval_range=(lo, hi),
        identical=same,
    )


def _polish(f: Flux, u, y):
    """Among u and its two float neighbours either way, keep the best residual."""
    u = np.asarray(u, dtype=float)
    cands = [u]
    for direction in (np.inf, -np.inf):
        v = u
        for _ in range(2):
            v = np.nextafter(v, direction)
            cands.append(v)
    cands = np.stack(cands)
    res = np.abs(np.asarray(f(cands)) - y)
    best = np.argmin(res, axis=0)
    return np.take_along_axis(cands, best[None, ...], axis=0)[0]


def branch_inverse(pair: ValidatedFluxPair, side: str, branch: str, y):
    """Return f_{side,branch}^{-1}(y); the minus branch lies left of the minimizer."""
    side, branch = _side(side), _branch(branch)
    f = pair.flux(side)
    theta = pair.theta(side)
    fmin = pair.minimum(side)
    if np.ndim(y) == 0:
        y = float(y)
        if y < fmin - 1e-12 * (1.0 + abs(y)):
            raise BelowMinimum(f"flux level {y!r} is below the {side} minimum {fmin!r}")
        if y <= fmin:
            return float(theta)
        if branch == "+":
            far = _expand_bracket(f, theta, y, +1.0, increasing=True)
            u = bisect_increasing(f, theta, far, y)
            return float(max(_polish(f, u, y), theta))
        far = _expand_bracket(f, theta, y, -1.0, increasing=True)
        u = bisect_increasing(lambda u: -f(u), far, theta, -y)
        return float(min(_polish(f, u, y), theta))
    y_arr = np.asarray(y, dtype=float)
    tol = 1e-12 * (1.0 + np.abs(y_arr))
    if np.any(y_arr < fmin - tol):
        raise BelowMinimum(
            f"flux level {np.min(y_arr)!r} is below the {side} minimum {fmin!r}"
        )
    y_eff = np.maximum(y_arr, fmin)
    theta_arr = np.full_like(y_eff, theta)
    if branch == "+":
        far = _expand_bracket(f, theta_arr, y_eff, +1.0, increasing=True)
        out = np.maximum(_polish(f, bisect_increasing(f, theta_arr, far, y_eff), y_eff), theta)
    else:
        far = _expand_bracket(f, theta_arr, y_eff, -1.0, increasing=True)
        out = np.minimum(_polish(f, bisect_increasing(lambda u: -f(u), far, theta_arr, -y_eff), y_eff), theta)
    out = np.where(y_eff <= fmin, theta, out)
    return _scalarize(out, y)


def _parse_pi_kind(kind: str):
    k = kind.replace("pi", "").replace("_", "").replace("{", "").replace("}", "").replace(",", "")
    target, source = (k.split("^") + [None])[:2]
    if len(target) != 2:
        raise ValueError(f"bad pi kind {kind!r}")
    t_side, t_branch = _side(target[0]), _branch(target[1])
    s_side = _side(source) if source else t_side
    return t_side, t_branch, s_side


def pi_map(pair: ValidatedFluxPair, kind: str, u):
    """Compose a branch inverse with a flux.

    ``kind`` reads like the notation: "l+" is f_{l,+}^{-1} o f_l and
    "r-^l" is f_{r,-}^{-1} o f_l.
    """
    t_side, t_branch, s_side = _parse_pi_kind(kind)
    return branch_inverse(pair, t_side, t_branch, pair.flux(s_side)(u))


def is_connection(pair: ValidatedFluxPair, A: float, B: float, tol: float = 1e-12) -> bool:
    gap = abs(pair.f_l(A) - pair.f_r(B))
    return gap <= tol * (1 + abs(pair.f_l(A))) and A <= pair.theta_l + tol and B >= pair.theta_r - tol


def connection_from_level(pair: ValidatedFluxPair, gamma: float) -> Connection:
    gamma = float(gamma)
    if gamma < pair.critical_level() - 1e-12 * (1 + abs(gamma)):
        raise BelowMinimum(f"gamma={gamma} is below the critical level {pair.critical_level()}")
    A = branch_inverse(pair, "l", "-", gamma)
    B = branch_inverse(pair, "r", "+", gamma)
    return Connection(A=A, B=B, gamma=gamma)


def make_connection(pair: ValidatedFluxPair, A: float, B: float) -> Connection:
    A, B = float(A), float(B)
    if not is_connection(pair, A, B, tol=1e-9):
        raise FluxError(f"({A}, {B}) is not a connection for this flux pair")
    return Connection(A=A, B=B, gamma=float(pair.f_l(A)))


def critical_connection(pair: ValidatedFluxPair) -> Connection:
    return connection_from_level(pair, pair.critical_level())


# ---------------------------------------------------------------------------
# concave fluxes (traffic)


@dataclass(frozen=True)
class ConcaveAdapter:
    """The involution u = -rho taking concave fluxes g to convex f(u) = -g(-u)."""

    rho_max: float
    g_l: Flux = field(repr=False, default=None)
    g_r: Flux = field(repr=False, default=None)

    @staticmethod
    def to_state(rho):
        return -np.asarray(rho) if not np.isscalar(rho) else -float(rho)

    @staticmethod
    def to_density(u):
        return -np.asarray(u) if not np.isscalar(u) else -float(u)

    @staticmethod
    def level_to_gamma(q: float) -> float:
        """Concave interface flux cap -> convex connection level."""
        return -float(q)

    @staticmethod
    def gamma_to_level(gamma: float) -> float:
        return -float(gamma)

    def connection(self, pair: ValidatedFluxPair, A_rho: float, B_rho: float) -> Connection:
        """Map a concave connection (g_l(A)=g_r(B), A >= argmax g_l, B <= argmax g_r)."""
        return make_connection(pair, self.to_state(A_rho), self.to_state(B_rho))


def _reflect(g: Flux) -> Flux:
    return g.reflected() if isinstance(g, PolyFlux) else ReflectedFlux(g)


def adapt_concave(g_l: Flux, g_r: Flux, rho_max: float, pad: float = 0.05):
    """Convex pair for the traffic fluxes g_l, g_r on [0, rho_max].

    Validation runs on the state interval [-rho_max, 0] widened by ``pad``
    of its length so the crossings at the ends are interior.
    """
    rho_max = float(rho_max)
    rs = np.linspace(0.0, rho_max, N_VALIDATION_SAMPLES)
    for g, name in ((g_l, "left"), (g_r, "right")):
        if np.max(g.d2(rs)) >= 0:
            raise NonConcave(f"{name} traffic flux is not strictly concave on [0, {rho_max}]")
    for rho in (0.0, rho_max):
        if abs(g_l(rho) - g_r(rho)) > 1e-12 * (1 + abs(g_l(rho))):
            raise FluxError(f"traffic fluxes must agree at rho={rho}")
    f_l, f_r = _reflect(g_l), _reflect(g_r)
    margin = pad * rho_max
    pair = validate_flux_pair(f_l, f_r, (-rho_max - margin, margin), identical=True)
    return pair, ConcaveAdapter(rho_max=rho_max, g_l=g_l, g_r=g_r)


def greenshields(vmax: float, rho_max: float) -> PolyFlux:
    """g(rho) = vmax * rho * (1 - rho / rho_max)."""
    return PolyFlux([0.0, vmax, -vmax / rho_max])
