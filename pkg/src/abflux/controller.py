"""Backward construction of an initial datum whose entropy solution equals a target profile at time T.

Every sample of the target carries a backward characteristic. Lines that
stayed on one side end at a foot x - T f'(v); lines that crossed x=0 are
refracted with the flux kept continuous. Where a jump of the target leaves a
gap between two feet, the gap is filled with a compression fan whose lines
focus at the jump at time T, refracting at the interface when the gap point
and the jump lie on different sides. Samples inside a plateau emitted by the
interface at the connection states have no foot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .attainability import AttainabilityReport, _Samples, _transfer, check_membership
from .flux import BelowMinimum, Connection, ValidatedFluxPair, branch_inverse, derivative_inverse
from .profile import Profile, l1_distance, l1_norm
from .riemann import interface_traces
from .solver import DEFAULT_CFL, Field, Grid, evolve, max_speed, padded_grid

N_LINES = 48  # interior samples per profile segment
N_FILL = 64  # interior samples per compression fan
FOOT_TOL = 1e-9
VALUE_TOL = 1e-9
RESIDUAL_TOL = 1e-10


class MembershipRequired(ValueError):
    """The target is not attainable, so no initial datum exists."""


class NotConstructible(ValueError):
    """The target is attainable but its line structure is outside what the construction covers."""


class BracketFailure(RuntimeError):
    """No admissible refracted line joins the requested start point and focus."""


# ---------------------------------------------------------------------------
# backward lines


@dataclass(frozen=True)
class BackwardFan:
    """One backward line per one-sided sample of the target.

    ``cross`` is the time a refracted line meets x=0 (NaN for lines that stay
    on one side); ``emitted`` marks samples whose line was emitted by the
    interface, which have no foot.
    """

    T: float
    cls: str
    tag: str
    x: np.ndarray
    side: np.ndarray
    value: np.ndarray
    foot: np.ndarray
    start: np.ndarray
    cross: np.ndarray
    emitted: np.ndarray
    pair: ValidatedFluxPair = field(repr=False)
    conn: Connection = field(repr=False)

    def __len__(self) -> int:
        return self.x.size

    def vertices(self, i: int) -> list[tuple[float, float]]:
        """(t, x) corners of line i, from t=0 to t=T."""
        if self.emitted[i]:
            t0 = self.T - self.x[i] / self._speed_at_arrival(i)
            return [(float(t0), 0.0), (self.T, float(self.x[i]))]
        if np.isnan(self.cross[i]):
            return [(0.0, float(self.foot[i])), (self.T, float(self.x[i]))]
        return [(0.0, float(self.foot[i])), (float(self.cross[i]), 0.0), (self.T, float(self.x[i]))]

    def _speed_at_arrival(self, i):
        f = self.pair.f_l if self.x[i] < 0 or (self.x[i] == 0 and self.side[i] < 0) else self.pair.f_r
        return f.d1(self.value[i])

    def feet(self) -> np.ndarray:
        """Feet with emitted samples pinned to x=0."""
        return np.where(self.emitted, 0.0, self.foot)

    def monotonicity_defect(self) -> float:
        """Largest decrease between consecutive feet; zero when no two lines cross."""
        d = np.diff(self.feet())
        return float(max(0.0, -d.min())) if d.size else 0.0


def _winner(report: AttainabilityReport) -> str:
    return report.candidates[-1]["tag"] if report.candidates else ""


def _left_of_zero(X, S):
    return (X < 0) | ((X == 0) & (S < 0))


def _snap_feet(foot, emitted):
    """Merge feet that differ by rounding only, so rarefaction centers are single points."""
    prev = None
    for i in np.flatnonzero(~emitted):
        if prev is not None and abs(foot[i] - prev) <= FOOT_TOL * (1.0 + abs(prev)):
            foot[i] = prev
        prev = foot[i]


def build_fan(
    omega: Profile,
    T: float,
    pair: ValidatedFluxPair,
    conn: Connection,
    report: AttainabilityReport | None = None,
    n: int = N_LINES,
) -> BackwardFan:
    if not T > 0:
        raise ValueError("T must be positive")
    report = report or check_membership(omega, T, pair, conn)
    if not report.member:
        raise MembershipRequired("the target profile is not attainable")
    cls, tag = report.cls, _winner(report)
    if tag.startswith("AB_late"):
        raise NotConstructible("emission at the connection states started after a crossing phase")
    dl, dr = pair.f_l.d1, pair.f_r.d1
    cuts = [report.L, report.R]
    if tag == "AB":
        cuts += [T * dl(conn.A), T * dr(conn.B)]
    smp = _Samples(omega, T, pair, cuts=cuts, n=n)
    X, V, S = smp.X, smp.V, smp.S
    left = _left_of_zero(X, S)
    foot = np.where(left, X - T * dl(V), X - T * dr(V))
    start = V.copy()
    cross = np.full(X.shape, np.nan)
    emitted = np.zeros(X.shape, dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore"):
        if cls == "A1":
            mid = smp.inside(0.0, report.R) | ((X == 0) & (S > 0))
            g = _transfer(pair, "l", "+", pair.f_r(V[mid]))
            if np.any(np.isnan(g)):
                raise NotConstructible("a refracted line has no partner state on the left")
            tau = np.where(X[mid] == 0, T, T - X[mid] / dr(V[mid]))
            start[mid], cross[mid], foot[mid] = g, tau, -dl(g) * tau
        elif cls == "A2":
            mid = smp.inside(report.L, 0.0) | ((X == 0) & (S < 0))
            g = _transfer(pair, "r", "-", pair.f_l(V[mid]))
            if np.any(np.isnan(g)):
                raise NotConstructible("a refracted line has no partner state on the right")
            tau = np.where(X[mid] == 0, T, T - X[mid] / dl(V[mid]))
            start[mid], cross[mid], foot[mid] = g, tau, -dr(g) * tau
        elif tag == "AB":
            scale = FOOT_TOL * (1.0 + np.abs(X))
            emitted = np.where(left, foot > scale, foot < -scale)
            target = np.where(left, conn.A, conn.B)
            off = emitted & (np.abs(V - target) > VALUE_TOL * (1.0 + np.abs(target)))
            if off.any():
                raise NotConstructible(
                    f"the line arriving at x={X[off][0]:.6g} was emitted by the interface with a state "
                    "other than the connection state"
                )
            for mask in (left, ~left):
                idx = np.flatnonzero(mask)
                e = emitted[idx]
                if e.any() and (np.any(np.diff(e.astype(int)) < 0) if mask is left else np.any(np.diff(e.astype(int)) > 0)):
                    raise NotConstructible("emitted lines do not form a plateau next to x=0")
            foot = np.where(left & ~emitted, np.minimum(foot, 0.0), foot)
            foot = np.where(~left & ~emitted, np.maximum(foot, 0.0), foot)
            foot = np.where(emitted, np.nan, foot)

    _snap_feet(foot, emitted)
    fan = BackwardFan(float(T), cls, tag, X, S, V, foot, start, cross, emitted, pair, conn)
    defect = fan.monotonicity_defect()
    if defect > FOOT_TOL * (1.0 + float(np.nanmax(np.abs(fan.feet())))):
        raise NotConstructible(f"backward lines cross (feet decrease by {defect:.3g})")
    return fan


# ---------------------------------------------------------------------------
# partition of the initial line


@dataclass(frozen=True)
class Compression:
    """Initial points in (lo, hi) whose lines focus at (focus, T).

    An end is closed when it carries no backward line of the target (it sits
    against emitted lines), so the fan supplies the initial value there.
    """

    lo: float
    hi: float
    focus: float
    closed_lo: bool = False
    closed_hi: bool = False

    @property
    def crossing(self) -> bool:
        return (self.lo < 0 and self.focus > 0) or (self.hi > 0 and self.focus < 0)


@dataclass(frozen=True)
class ConstantFill:
    """Initial state held on (lo, hi); its lines are absorbed by the interface before T."""

    lo: float
    hi: float
    value: float


@dataclass(frozen=True)
class ShockFill:
    """Initial state held on (lo, hi) whose lines end on a straight shock from (0, 0).

    The shock separates this state from the connection state emitted on the
    same side and reaches (speed * T, T), the end of a plateau shorter than
    the emission wedge.
    """

    lo: float
    hi: float
    value: float
    speed: float


@dataclass(frozen=True)
class InitialPartition:
    rarefaction_centers: tuple
    compressions: tuple
    wave_intervals: tuple
    constants: tuple
    shock_fills: tuple
    pieces: tuple  # ordered ("lines", index array) / Compression / ConstantFill / ShockFill items

    def to_dict(self) -> dict:
        return {
            "rarefaction_centers": list(self.rarefaction_centers),
            "compressions": [c.__dict__ for c in self.compressions],
            "wave_intervals": [list(w) for w in self.wave_intervals],
            "constants": [c.__dict__ for c in self.constants],
            "shock_fills": [c.__dict__ for c in self.shock_fills],
        }


def _near(a, b):
    return abs(a - b) <= FOOT_TOL * (1.0 + abs(a) + abs(b))


def _stationary_fills(fan: BackwardFan, j: int, i: int):
    """Fills between the two trace lines for a trace pair on a T3 set."""
    pair, T = fan.pair, fan.T
    if fan.tag == "T3minus":
        u_l = fan.value[j]
        star = branch_inverse(pair, "r", "-", pair.f_l(u_l))
        x_star = -T * pair.f_r.d1(star)
        out = [ConstantFill(fan.foot[j], 0.0, u_l), ConstantFill(0.0, x_star, star)]
        out.append(Compression(x_star, fan.foot[i], 0.0))
    else:
        u_r = fan.value[i]
        star = branch_inverse(pair, "l", "+", pair.f_r(u_r))
        x_star = -T * pair.f_l.d1(star)
        out = [Compression(fan.foot[j], x_star, 0.0), ConstantFill(x_star, 0.0, star), ConstantFill(0.0, fan.foot[i], u_r)]
    return [p for p in out if p.hi > p.lo]


def _shock_state(f, emitted: float, speed: float, upper: bool) -> float:
    """State joined to ``emitted`` by a Lax shock of the given speed; above it if ``upper``."""
    def gap(u):
        return (f(u) - f(emitted)) / (u - emitted) - speed

    step = 1.0
    far = emitted + (step if upper else -step)
    while (gap(far) < 0) == upper:
        step *= 2.0
        far = emitted + (step if upper else -step)
        if step > 1e12:
            raise NotConstructible("no state carries a shock of the plateau speed")
    near = emitted + (1e-15 if upper else -1e-15) * (1.0 + abs(emitted))
    return float(brentq(gap, near, far, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _cut_plateau(fan: BackwardFan, comp: Compression) -> list:
    """A compression against a plateau shorter than the emission wedge becomes a straight shock.

    The emitted connection state meets the incoming data along the line from
    (0, 0) to (focus, T); a constant state feeds that shock and the rest of
    the gap focuses at (focus, T).
    """
    pair, conn, T = fan.pair, fan.conn, fan.T
    y = comp.focus
    if fan.tag != "AB":
        return [comp]
    if comp.closed_hi and y < 0 and y > T * pair.f_l.d1(conn.A) + FOOT_TOL:
        f, emitted, upper = pair.f_l, conn.A, True
    elif comp.closed_lo and y > 0 and y < T * pair.f_r.d1(conn.B) - FOOT_TOL:
        f, emitted, upper = pair.f_r, conn.B, False
    else:
        return [comp]
    speed = y / T
    star = _shock_state(f, emitted, speed, upper)
    z1 = y - T * f.d1(star)
    if upper:
        if z1 < comp.lo - FOOT_TOL * (1.0 + abs(z1)):
            raise NotConstructible("a plateau cut short by a shock needs a faster state than the target has at its end")
        out = [Compression(comp.lo, z1, y)] if z1 > comp.lo else []
        return out + [ShockFill(max(z1, comp.lo), 0.0, star, speed)]
    if z1 > comp.hi + FOOT_TOL * (1.0 + abs(z1)):
        raise NotConstructible("a plateau cut short by a shock needs a slower state than the target has at its end")
    out = [ShockFill(0.0, min(z1, comp.hi), star, speed)]
    return out + ([Compression(z1, comp.hi, y)] if z1 < comp.hi else [])


def partition_initial_line(fan: BackwardFan, omega: Profile | None = None, T: float | None = None) -> InitialPartition:
    """Split the initial line into families of target lines, compression fans and constant fills.

    ``omega`` and ``T`` are accepted for symmetry with build_fan; the fan
    already carries everything needed.
    """
    F = fan.feet()
    X, S = fan.x, fan.side
    real = ~fan.emitted
    pieces, centers, waves, run = [], [], [], []

    def flush():
        if run:
            idx = np.array(run)
            pieces.append(("lines", idx))
            lo, hi = F[idx[0]], F[idx[-1]]
            if hi > lo:
                waves.append((float(lo), float(hi)))
            run.clear()

    for i in range(F.size):
        if i:
            j = i - 1
            if X[i] == X[j] and X[i] == 0 and S[j] < 0 < S[i] and fan.tag in ("T3minus", "T3plus"):
                flush()
                pieces += _stationary_fills(fan, j, i)
            elif X[i] == X[j] and F[i] > F[j] and not _near(F[i], F[j]):
                flush()
                comp = Compression(float(F[j]), float(F[i]), float(X[i]), bool(fan.emitted[j]), bool(fan.emitted[i]))
                pieces += _cut_plateau(fan, comp)
            elif real[i] and real[j] and _near(F[i], F[j]) and abs(fan.start[i] - fan.start[j]) > VALUE_TOL:
                if not centers or not _near(centers[-1], F[i]):
                    centers.append(float(F[i]))
        if real[i]:
            run.append(i)
    flush()
    comps = tuple(p for p in pieces if isinstance(p, Compression))
    consts = tuple(p for p in pieces if isinstance(p, ConstantFill))
    shocks = tuple(p for p in pieces if isinstance(p, ShockFill))
    return InitialPartition(tuple(centers), comps, tuple(waves), consts, shocks, tuple(pieces))


# ---------------------------------------------------------------------------
# refracted compression lines


def _crossing_states(pair: ValidatedFluxPair, y: float, T: float, tau: float):
    """States of the line crossing x=0 at time tau and reaching (y, T): (initial, final)."""
    lam = y / (T - tau)
    if y < 0:
        u_fin = derivative_inverse(pair.f_l, lam)
        return branch_inverse(pair, "r", "-", pair.f_l(u_fin)), u_fin
    u_fin = derivative_inverse(pair.f_r, lam)
    return branch_inverse(pair, "l", "+", pair.f_r(u_fin)), u_fin


def _crossing_start(pair, y, T, tau):
    u0, _ = _crossing_states(pair, y, T, tau)
    slope = pair.f_r.d1(u0) if y < 0 else pair.f_l.d1(u0)
    return -slope * tau


def _tau_range(pair, conn, y, T):
    """Crossing times whose lines carry a flux at or above the connection level."""
    s = pair.f_l.d1(conn.A) if y < 0 else pair.f_r.d1(conn.B)
    lo = T - y / s if s * y > 0 else 0.0
    return max(lo, 0.0)


def crossing_residual(x: float, y: float, alpha: float, pair: ValidatedFluxPair, T: float) -> float:
    """T - y/lambda(alpha) + x/alpha: zero when the line from (x, 0) with slope alpha refracts into (y, T)."""
    if y < 0:
        u0 = derivative_inverse(pair.f_r, alpha)
        lam = pair.f_l.d1(branch_inverse(pair, "l", "-", pair.f_r(u0)))
    else:
        u0 = derivative_inverse(pair.f_l, alpha)
        lam = pair.f_r.d1(branch_inverse(pair, "r", "+", pair.f_l(u0)))
    return T - y / lam + x / alpha


def _solve_crossing(x, y, pair, conn, T):
    """Crossing time, initial state and final state of the refracted line from (x, 0) to (y, T)."""
    if y == 0 or (x != 0 and (x > 0) == (y > 0)):
        raise BracketFailure("start point and focus must lie on different sides of x=0")
    sign = 1.0 if y < 0 else -1.0  # the start abscissa grows with tau when y < 0
    lo = _tau_range(pair, conn, y, T)
    if lo >= T:
        raise BracketFailure("no admissible crossing time")
    if x == 0:
        if lo > 0:
            raise BracketFailure("a line starting at x=0 would carry a flux below the connection level")
        u0, u1 = _crossing_states(pair, y, T, 0.0)
        return 0.0, u0, u1
    g = lambda tau: sign * (_crossing_start(pair, y, T, tau) - x)
    try:
        g_lo = g(lo)
    except BelowMinimum as exc:
        raise BracketFailure(str(exc)) from None
    if g_lo > 0:
        raise BracketFailure(f"x={x:.6g} is closer to the interface than any admissible crossing line")
    hi = None
    for k in range(1, 80):
        cand = T - (T - lo) * 2.0**-k
        if g(cand) >= 0:
            hi = cand
            break
    if hi is None:
        raise BracketFailure(f"x={x:.6g} is too far from the interface to reach ({y:.6g}, T)")
    tau = brentq(g, lo, hi, xtol=1e-15 * T, rtol=4 * np.finfo(float).eps, maxiter=200) if g_lo < 0 else lo
    u0, u1 = _crossing_states(pair, y, T, tau)
    return tau, u0, u1


def compression_slope(x: float, y: float, pair: ValidatedFluxPair, conn: Connection, T: float) -> float:
    """Initial slope of the refracted line from (x, 0) to (y, T), for x and y on opposite sides."""
    _, u0, _ = _solve_crossing(float(x), float(y), pair, conn, float(T))
    return float(pair.f_r.d1(u0) if y < 0 else pair.f_l.d1(u0))


# ---------------------------------------------------------------------------
# steering


@dataclass
class _Rays:
    foot: list = field(default_factory=list)
    side: list = field(default_factory=list)  # side of the foot
    v_in: list = field(default_factory=list)
    s_in: list = field(default_factory=list)
    t_cross: list = field(default_factory=list)  # when the line meets x=0 or a shock; inf if never before T
    v_out: list = field(default_factory=list)  # NaN if the line ends there
    s_out: list = field(default_factory=list)

    def add(self, foot, side, v_in, s_in, t_cross=math.inf, v_out=math.nan, s_out=math.nan):
        for name, val in zip(self.__dict__, (foot, side, v_in, s_in, t_cross, v_out, s_out)):
            getattr(self, name).append(float(val))

    def arrays(self) -> dict:
        return {k: np.array(v) for k, v in self.__dict__.items()}


@dataclass
class SteeringPlan:
    u0: Profile
    T: float
    target: Profile
    fan: BackwardFan = field(repr=False)
    partition: InitialPartition
    pair: ValidatedFluxPair = field(repr=False)
    conn: Connection
    rays: dict = field(repr=False)
    emission: bool  # the interface emits the connection states on (0, T)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "u0": self.u0.to_dict(),
            "T": self.T,
            "class": self.fan.cls,
            "trace_set": self.fan.tag,
            "partition": self.partition.to_dict(),
            "diagnostics": self.diagnostics,
        }


def _fill_points(comp: Compression, pair, conn, T, rays: _Rays, residuals: list):
    """Initial values on a compression fan, with its lines added to ``rays``."""
    y = comp.focus
    zs = np.linspace(comp.lo, comp.hi, N_FILL + 2)
    keep = np.ones(zs.size, dtype=bool)
    keep[0], keep[-1] = comp.closed_lo, comp.closed_hi
    zs = zs[keep]
    samples = [(z, -1 if z < 0 else 1) for z in zs if z != 0]
    if comp.lo < 0 < comp.hi or (comp.hi == 0 and comp.closed_hi):
        samples.append((0.0, -1))
    if comp.lo < 0 < comp.hi or (comp.lo == 0 and comp.closed_lo):
        samples.append((0.0, 1))
    samples.sort()
    pts = []
    for z, z_side in samples:
        if y == 0 or (y < 0) == (z_side < 0):
            f = pair.f_l if (z_side if y == 0 else y) < 0 else pair.f_r
            s = (y - z) / T
            u = derivative_inverse(f, s)
            rays.add(z, z_side, u, s)
        else:
            tau, u, u1 = _solve_crossing(z, y, pair, conn, T)
            f0, f1 = (pair.f_r, pair.f_l) if y < 0 else (pair.f_l, pair.f_r)
            alpha = f0.d1(u)
            if z != 0:
                residuals.append(abs(crossing_residual(z, y, alpha, pair, T)))
            rays.add(z, z_side, u, alpha, tau, u1, f1.d1(u1))
        pts.append((z, u))
    return pts


def _constant_points(c: ConstantFill, pair, rays: _Rays):
    side = -1 if c.hi <= 0 else 1
    s = (pair.f_l if side < 0 else pair.f_r).d1(c.value)
    for z in np.linspace(c.lo, c.hi, N_FILL + 2):
        t_hit = -z / s if s != 0 and -z / s >= 0 else math.inf
        rays.add(z, side, c.value, s, t_hit)
    return [(c.lo, c.value), (c.hi, c.value)]


def _shock_points(c: ShockFill, pair, rays: _Rays):
    side = -1 if c.hi <= 0 else 1
    s = (pair.f_l if side < 0 else pair.f_r).d1(c.value)
    for z in np.linspace(c.lo, c.hi, N_FILL + 2):
        rays.add(z, side, c.value, s, z / (c.speed - s))
    return [(c.lo, c.value), (c.hi, c.value)]


def steer(
    omega: Profile,
    T: float,
    pair: ValidatedFluxPair,
    conn: Connection,
    report: AttainabilityReport | None = None,
    n: int = N_LINES,
) -> SteeringPlan:
    """Initial datum whose entropy solution equals ``omega`` at time T."""
    fan = build_fan(omega, T, pair, conn, report, n)
    part = partition_initial_line(fan, omega, T)
    T = fan.T
    rays = _Rays()
    pts: list[tuple[float, float]] = []
    residuals: list[float] = []
    for piece in part.pieces:
        if isinstance(piece, Compression):
            pts += _fill_points(piece, pair, conn, T, rays, residuals)
        elif isinstance(piece, ConstantFill):
            pts += _constant_points(piece, pair, rays)
        elif isinstance(piece, ShockFill):
            pts += _shock_points(piece, pair, rays)
        else:
            for i in piece[1]:
                pts.append((fan.foot[i], fan.start[i]))
                direct = np.isnan(fan.cross[i])
                if fan.foot[i] != 0:
                    side = -1 if fan.foot[i] < 0 else 1
                else:
                    side = (-1 if _left_of_zero(fan.x[i], fan.side[i]) else 1) * (1 if direct else -1)
                f_in = pair.f_l if side < 0 else pair.f_r
                if direct:
                    rays.add(fan.foot[i], side, fan.start[i], f_in.d1(fan.start[i]))
                else:
                    f_out = pair.f_r if side < 0 else pair.f_l
                    rays.add(
                        fan.foot[i], side, fan.start[i], f_in.d1(fan.start[i]),
                        fan.cross[i], fan.value[i], f_out.d1(fan.value[i]),
                    )

    xs = np.array([p[0] for p in pts])
    us = np.array([p[1] for p in pts])
    drop = np.diff(xs)
    if drop.size and drop.min() < -FOOT_TOL * (1.0 + np.abs(xs).max()):
        raise NotConstructible(f"initial points out of order by {-drop.min():.3g}")
    u0 = Profile.from_points(np.maximum.accumulate(xs), us)

    real = ~fan.emitted
    bound = float(max(np.max(np.abs(fan.value)), np.max(np.abs(fan.start[real])) if real.any() else 0.0))
    for c in part.constants + part.shock_fills:
        bound = max(bound, abs(c.value))
    u_lo, u_hi = u0.value_range()
    diagnostics = {
        "class": fan.cls,
        "trace_set": fan.tag,
        "n_lines": int(len(fan)),
        "n_initial_points": int(xs.size),
        "foot_monotonicity_defect": fan.monotonicity_defect(),
        "max_crossing_residual": float(max(residuals, default=0.0)),
        "bound_M": bound,
        "u0_sup": max(abs(u_lo), abs(u_hi)),
        "rarefaction_centers": list(part.rarefaction_centers),
    }
    if diagnostics["max_crossing_residual"] > RESIDUAL_TOL * T:
        raise BracketFailure(f"crossing residual {diagnostics['max_crossing_residual']:.3g} exceeds tolerance")
    return SteeringPlan(u0, T, omega, fan, part, pair, conn, rays.arrays(), fan.tag == "AB", diagnostics)


# ---------------------------------------------------------------------------
# exact field along the lines


def _state_lists(plan: SteeringPlan, t: float):
    """Positions and states carried by the lines alive at time t, split by side of x=0."""
    r = plan.rays
    before = (t < r["t_cross"]) | (t == 0)
    pos = np.where(before, r["foot"] + r["s_in"] * t, r["s_out"] * (t - r["t_cross"]))
    val = np.where(before, r["v_in"], r["v_out"])
    side = np.where(before, r["side"], -r["side"])
    alive = before | np.isfinite(r["v_out"])
    pos, val, side = pos[alive], val[alive], side[alive]
    side = np.where(pos < 0, -1, np.where(pos > 0, 1, side))
    lists = {s: (pos[side == s], val[side == s]) for s in (-1, 1)}
    if not (plan.emission and t > 0):
        return lists
    cuts = {-1 if c.hi <= 0 else 1: c for c in plan.partition.shock_fills}
    te = np.linspace(0.0, t, N_FILL + 2)
    for s, f, state in ((-1, plan.pair.f_l, plan.conn.A), (1, plan.pair.f_r, plan.conn.B)):
        p_e = f.d1(state) * (t - te)
        v_e = np.full(te.size, state)
        p, v = lists[s]
        if s in cuts:
            x_s = cuts[s].speed * t
            keep = p_e >= x_s if s < 0 else p_e <= x_s
            p_e, v_e = np.append(p_e[keep], x_s), np.append(v_e[keep], state)
            p, v = np.append(p, x_s), np.append(v, cuts[s].value)
        lists[s] = (np.append(p, p_e), np.append(v, v_e))
    return lists


def _evaluate(lists, x):
    out = np.empty_like(x)
    for s, mask in ((-1, x < 0), (1, x >= 0)):
        p, v = lists[s]
        if not mask.any():
            continue
        if p.size == 0:
            raise NotConstructible("no line reaches one side of the interface")
        order = np.argsort(p, kind="stable")
        out[mask] = np.interp(x[mask], p[order], v[order])
    return out


def evaluate(plan: SteeringPlan, x, t: float):
    """Solution of the steered problem at points x and time t in [0, T)."""
    if not 0 <= t < plan.T:
        raise ValueError("t must lie in [0, T)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _evaluate(_state_lists(plan, float(t)), x)


def reconstruct_field(plan: SteeringPlan, grid: Grid, times=None, n_out: int = 10) -> Field:
    """Solution of the steered problem at cell centers, read off the characteristic lines.

    At t=T the fans have collapsed onto the jumps of the target, so the target
    itself is returned there.
    """
    T = plan.T
    if times is None:
        times = np.linspace(0.0, T, int(n_out) + 1)
    times = np.array(sorted({float(t) for t in times} | {0.0, T}))
    if times[0] < 0 or times[-1] > T:
        raise ValueError("times must lie in [0, T]")
    x = grid.centers
    k = grid.interface_edge
    states, traces = [], []
    for t in times:
        u = plan.target(x) if t == T else _evaluate(_state_lists(plan, t), x)
        states.append(u)
        traces.append(interface_traces(plan.pair, plan.conn, u[k - 1], u[k]))
    diagnostics = {"source": "characteristics", "n_rays": int(plan.rays["foot"].size)}
    return Field(grid, times, np.array(states), traces, plan.pair, plan.conn, diagnostics, exact=True)


def roundtrip_error(plan: SteeringPlan, grid: Grid, cfl: float = DEFAULT_CFL, backend: str | None = None) -> dict:
    """Run the Godunov solver from the steered datum and compare with the target on ``grid``.

    The solver grid extends ``grid`` far enough that no wave from outside the
    steered datum's breakpoints reaches the window by time T.
    """
    M = max(plan.diagnostics["bound_M"], plan.diagnostics["u0_sup"])
    a, b = plan.u0.support
    reach = max(abs(a), abs(b), abs(grid.edges[0]), abs(grid.edges[-1]))
    width = reach + plan.T * max_speed(plan.pair, (-M, M), (-M, M)) + grid.dx
    big = padded_grid(grid, width)
    fld = evolve(plan.u0, plan.T, plan.pair, plan.conn, big, cfl=cfl, backend=backend)
    k0 = big.interface_edge - grid.interface_edge
    vals = fld.final[k0 : k0 + grid.n_cells]
    err = l1_distance(vals, grid.edges, plan.target)
    norm = l1_norm(plan.target, grid.edges[0], grid.edges[-1])
    return {
        "l1_error": err,
        "relative_l1_error": err / norm if norm > 0 else err,
        "target_l1_norm": norm,
        "cells": grid.n_cells,
        "solver_cells": big.n_cells,
        "backend": fld.diagnostics["backend"],
    }
