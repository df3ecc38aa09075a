"""Decide whether a profile can be reached at time T from some initial datum.

A profile is tested against three classes, told apart by its traces at x=0:
A1 (characteristics on (0, R) were refracted from the left side), A2 (the
mirror case on (L, 0)) and A3 (no refraction; a plateau at the connection
states or a trace pair on one of the T3 sets). Each class comes with an
inequality system on the characteristic speeds, a Lax condition at jumps and
monotonicity of the backward foot map.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .flux import BelowMinimum, Connection, ValidatedFluxPair, branch_inverse
from .profile import Profile
from .riemann import trace_set_tags

N_SAMPLES = 64
STRICT_MARGIN = 1e-9
CLASSES = ("A1", "A2", "A3")


class DomainError(ValueError):
    """A composed map hit a flux branch below its minimum."""


@dataclass(frozen=True)
class ToleranceSet:
    trace: float = 1e-9  # state slack for trace sets and plateaus
    position: float = 1e-9  # slack of the speed inequalities, in x units
    mono: float = 1e-9  # allowed decrease of foot maps, in x units
    strict: float = 1e-9  # band in which a failed strict check is a boundary case
    jump: float = 1e-9  # state slack for the downward-jump condition

    @classmethod
    def scaled(cls, h: float, factor: float = 5.0) -> "ToleranceSet":
        """All tolerances set to factor*h, for profiles read off a grid of spacing h."""
        v = factor * h
        return cls(v, v, v, v, v)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Violation:
    condition: str
    x: float
    margin: float | None
    kind: str = "hard"  # or "boundary" for strict checks failing inside the tolerance band

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Candidate:
    cls: str
    L: float | None
    R: float | None
    tag: str
    edge: float = 0.0  # outer end of the refracted band for late emission

    def to_dict(self) -> dict:
        return {"class": self.cls, "L": self.L, "R": self.R, "tag": self.tag}


@dataclass
class AttainabilityReport:
    verdict: str
    cls: str
    L: float | None
    R: float | None
    violations: list
    tolerances: ToleranceSet
    candidates: list = field(default_factory=list)

    @property
    def member(self) -> bool:
        return self.verdict == "member"

    @property
    def hard_violations(self) -> list:
        return [v for v in self.violations if v.kind == "hard"]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "class": self.cls,
            "witnesses": {"L": self.L, "R": self.R},
            "violations": [v.to_dict() for v in self.violations],
            "tolerances": self.tolerances.to_dict(),
            "candidates": self.candidates,
        }


@dataclass(frozen=True)
class CharacteristicMap:
    """A foot map or crossing-time map sampled at x with one-sided values."""

    kind: str
    x: np.ndarray
    left: np.ndarray
    right: np.ndarray
    T: float


def trace_limits(omega: Profile, x: float) -> tuple[float, float]:
    return omega.limits(x)


# ---------------------------------------------------------------------------
# sampling


class _Samples:
    """Ordered one-sided samples of a profile.

    The line is cut at the profile breakpoints, at 0 and at the extra cuts;
    each segment contributes its two end limits plus ``n`` interior points.
    A breakpoint therefore shows up twice: left limit (side -1) then right
    limit (side +1). Interior points have side 0.
    """

    def __init__(self, omega: Profile, T: float, pair: ValidatedFluxPair, cuts=(), n: int = N_SAMPLES):
        pts = set(omega.breakpoints().tolist()) | {0.0} | {float(c) for c in cuts if c is not None}
        bps = np.array(sorted(pts))
        reach_l = T * abs(pair.f_l.d1(omega.left_tail))
        reach_r = T * abs(pair.f_r.d1(omega.right_tail))
        lo = bps[0] - 1.0 - reach_l
        hi = bps[-1] + 1.0 + reach_r
        edges = np.concatenate([[lo], bps, [hi]])
        a, b = edges[:-1], edges[1:]
        ua = np.asarray(omega(a), dtype=float)
        ub = np.asarray(omega.left_limit(b), dtype=float)
        t = np.linspace(0.0, 1.0, n + 2)
        X = a[:, None] + t[None, :] * (b - a)[:, None]
        X[:, 0], X[:, -1] = a, b
        V = ua[:, None] + t[None, :] * (ub - ua)[:, None]
        V[:, 0], V[:, -1] = ua, ub
        S = np.zeros_like(X, dtype=int)
        S[:, 0], S[:, -1] = 1, -1
        self.seg = np.repeat(np.arange(a.size), n + 2)
        self.a, self.b, self.ua, self.ub = a, b, ua, ub
        self.X, self.V, self.S = X.ravel(), V.ravel(), S.ravel()
        self.n = n

    def inside(self, lo: float, hi: float) -> np.ndarray:
        """Samples belonging to the open interval (lo, hi), limits included."""
        X, S = self.X, self.S
        left_ok = (X > lo) | ((X == lo) & (S > 0))
        right_ok = (X < hi) | ((X == hi) & (S < 0))
        return left_ok & right_ok

    def strictly_inside(self, lo: float, hi: float) -> np.ndarray:
        """Like inside() but without the limits at the open ends."""
        return (self.X > lo) & (self.X < hi)


# ---------------------------------------------------------------------------
# maps


def _transfer(pair: ValidatedFluxPair, target: str, branch: str, levels):
    """f_{target,branch}^{-1}(levels); NaN where the level is below the target minimum."""
    levels = np.asarray(levels, dtype=float)
    fmin = pair.minimum(target)
    ok = levels >= fmin - 1e-12 * (1.0 + np.abs(levels))
    out = np.full(levels.shape, np.nan)
    if ok.any():
        out[ok] = branch_inverse(pair, target, branch, np.maximum(levels[ok], fmin))
    return out


def _foot_outer(side_flux, X, V, T):
    return X - T * side_flux.d1(V)


def _foot_refracted_right(pair, X, V, T):
    """Foot of a line arriving on x>0 that crossed from the left side."""
    g = _transfer(pair, "l", "+", pair.f_r(V))
    return -pair.f_l.d1(g) * (T - X / pair.f_r.d1(V))


def _foot_refracted_left(pair, X, V, T):
    g = _transfer(pair, "r", "-", pair.f_l(V))
    return -pair.f_r.d1(g) * (T - X / pair.f_l.d1(V))


def _crossing_time(f, X, V, T):
    speed = f.d1(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = T - X / speed
    out = np.where(X == 0, T, out)
    return np.where((X == 0) | (speed * X > 0), out, np.nan)


def _regions(smp: _Samples, cls: str, L, R):
    if cls == "A1":
        return {"left": smp.inside(-math.inf, 0.0), "mid": smp.inside(0.0, R), "right": smp.inside(R, math.inf)}
    if cls == "A2":
        return {"left": smp.inside(-math.inf, L), "mid": smp.inside(L, 0.0), "right": smp.inside(0.0, math.inf)}
    return {"left": smp.inside(-math.inf, L), "right": smp.inside(R, math.inf)}


def _phi_values(smp, cls, L, R, T, pair):
    regions = _regions(smp, cls, L, R)
    phi = np.full(smp.X.shape, np.nan)
    m = regions["left"]
    phi[m] = _foot_outer(pair.f_l, smp.X[m], smp.V[m], T)
    m = regions["right"]
    phi[m] = _foot_outer(pair.f_r, smp.X[m], smp.V[m], T)
    if "mid" in regions:
        m = regions["mid"]
        with np.errstate(divide="ignore", invalid="ignore"):
            if cls == "A1":
                phi[m] = _foot_refracted_right(pair, smp.X[m], smp.V[m], T)
            else:
                phi[m] = _foot_refracted_left(pair, smp.X[m], smp.V[m], T)
    return phi, regions


def _as_map(kind, smp, values, mask, T) -> CharacteristicMap:
    X, S = smp.X[mask], smp.S[mask]
    vals = values[mask]
    xs = np.unique(X)
    left = np.full(xs.shape, np.nan)
    right = np.full(xs.shape, np.nan)
    idx = np.searchsorted(xs, X)
    for i, s, v in zip(idx, S, vals):
        if s <= 0:
            left[i] = v
        if s >= 0:
            right[i] = v
    left = np.where(np.isnan(left), right, left)
    right = np.where(np.isnan(right), left, right)
    return CharacteristicMap(kind, xs, left, right, T)


def phi_map(omega: Profile, T: float, pair: ValidatedFluxPair, conn: Connection, cls: str, L=None, R=None, n: int = N_SAMPLES) -> CharacteristicMap:
    """Backward foot map of the class; raises DomainError if a refracted line has no partner state."""
    cls = _norm_cls(cls)
    L, R = _default_witnesses(cls, L, R)
    smp = _Samples(omega, T, pair, cuts=(L, R), n=n)
    phi, regions = _phi_values(smp, cls, L, R, T, pair)
    if "mid" in regions and np.any(np.isnan(phi[regions["mid"]])):
        bad = smp.X[regions["mid"] & np.isnan(phi)]
        raise DomainError(f"refracted foot undefined near x={bad[0]:.6g}")
    mask = np.zeros(smp.X.shape, dtype=bool)
    for m in regions.values():
        mask |= m
    return _as_map({"A1": "phi1", "A2": "phi2", "A3": "phi3"}[cls], smp, phi, mask, T)


def psi_map(omega: Profile, T: float, pair: ValidatedFluxPair, cls: str, L=None, R=None, n: int = N_SAMPLES) -> CharacteristicMap:
    """Time at which the backward line from x reaches the interface, on the refracted region."""
    cls = _norm_cls(cls)
    if cls == "A1":
        smp = _Samples(omega, T, pair, cuts=(R,), n=n)
        mask = smp.inside(0.0, R)
        psi = _crossing_time(pair.f_r, smp.X, smp.V, T)
        return _as_map("psi1", smp, psi, mask, T)
    if cls == "A2":
        smp = _Samples(omega, T, pair, cuts=(L,), n=n)
        mask = smp.inside(L, 0.0)
        psi = _crossing_time(pair.f_l, smp.X, smp.V, T)
        return _as_map("psi2", smp, psi, mask, T)
    raise ValueError("crossing-time maps exist only for classes A1 and A2")


def _norm_cls(cls: str) -> str:
    c = cls.upper().replace("_", "")
    if c.startswith("A3"):
        c = "A3"
    if c not in CLASSES:
        raise ValueError(f"unknown class {cls!r}")
    return c


def _default_witnesses(cls, L, R):
    if cls == "A1":
        if R is None:
            raise ValueError("class A1 needs R")
        return None, float(R)
    if cls == "A2":
        if L is None:
            raise ValueError("class A2 needs L")
        return float(L), None
    return float(L or 0.0), float(R or 0.0)


# ---------------------------------------------------------------------------
# witnesses


def _last_crossing(smp: _Samples, mask, g, thr, value_at):
    """sup{x in mask : g >= thr}, refined inside a segment by root finding.

    ``value_at(x)`` evaluates g continuously inside a segment.
    """
    idx = np.flatnonzero(mask)
    ok = g[idx] >= thr
    if not ok.any():
        return None
    j = idx[np.flatnonzero(ok)[-1]]
    if j == idx[-1] or j + 1 >= smp.X.size:
        return float(smp.X[j])
    x0, x1 = smp.X[j], smp.X[j + 1]
    if x1 == x0 or smp.seg[j] != smp.seg[j + 1]:
        return float(x0)
    v0, v1 = smp.V[j], smp.V[j + 1]

    def fun(x):
        return value_at(x, v0 + (x - x0) / (x1 - x0) * (v1 - v0)) - thr

    return float(brentq(fun, x0, x1, xtol=1e-14, rtol=1e-15))


def _first_crossing(smp: _Samples, mask, g, thr, value_at):
    """inf{x in mask : g <= thr}, the mirror of _last_crossing."""
    idx = np.flatnonzero(mask)
    ok = g[idx] <= thr
    if not ok.any():
        return None
    j = idx[np.flatnonzero(ok)[0]]
    if j == idx[0] or j == 0:
        return float(smp.X[j])
    x0, x1 = smp.X[j - 1], smp.X[j]
    if x1 == x0 or smp.seg[j] != smp.seg[j - 1]:
        return float(x1)
    v0, v1 = smp.V[j - 1], smp.V[j]

    def fun(x):
        return value_at(x, v0 + (x - x0) / (x1 - x0) * (v1 - v0)) - thr

    return float(brentq(fun, x0, x1, xtol=1e-14, rtol=1e-15))


def _plateau_end(smp: _Samples, mask_side, target, tol, direction):
    """End of the maximal stretch next to 0 where the profile stays within tol of target.

    direction=-1 walks left from 0-, +1 walks right from 0+. Returns -inf/+inf if
    the plateau reaches the sampling window edge.
    """
    idx = np.flatnonzero(mask_side)
    if direction < 0:
        idx = idx[::-1]
    dev = np.abs(smp.V[idx] - target)
    bad = np.flatnonzero(dev > tol)
    if bad.size == 0:
        return -math.inf if direction < 0 else math.inf
    k = bad[0]
    if k == 0:
        return 0.0
    j_bad, j_ok = idx[k], idx[k - 1]
    x_bad, x_ok = smp.X[j_bad], smp.X[j_ok]
    if x_bad == x_ok:
        return float(x_bad)
    # affine in between: solve |v - target| = tol
    v_bad, v_ok = smp.V[j_bad], smp.V[j_ok]
    level = target + math.copysign(tol, v_bad - target)
    s = (level - v_ok) / (v_bad - v_ok)
    return float(x_ok + s * (x_bad - x_ok))


def _split_at_zero(pieces):
    out = []
    for x0, x1, u0, u1 in pieces:
        if x0 < 0.0 < x1:
            um = u0 + (0.0 - x0) / (x1 - x0) * (u1 - u0)
            out += [(x0, 0.0, u0, um), (0.0, x1, um, u1)]
        else:
            out.append((x0, x1, u0, u1))
    return out


def sharpen(omega: Profile, width: float, slope: float) -> Profile:
    """Collapse steep decreasing runs into jumps at their midpoints, moving no point by more than ``width``.

    A run is a maximal chain of contiguous pieces with slope below -slope that
    does not cross x=0 and has no upward jump inside. A run too wide to collapse
    whole gives up its window of largest drop; the mild tails stay. This reads
    smeared shocks of a grid profile as the jumps they stand for; exact
    profiles are left untouched when width is tiny.
    """
    pcs = _split_at_zero(omega.pieces)
    out = []
    i = 0
    while i < len(pcs):
        j = i
        while j < len(pcs):
            x0, x1, u0, u1 = pcs[j]
            if not (u1 - u0) < -slope * (x1 - x0):
                break
            if j > i and (x0 == 0.0 or pcs[j - 1][3] < u0):
                break
            j += 1
        if j == i:
            out.append(pcs[i])
            i += 1
            continue
        best = None
        for s in range(i, j):
            e = s
            while e < j and pcs[e][1] - pcs[s][0] <= 2.0 * width:
                e += 1
            if e > s and (best is None or pcs[s][2] - pcs[e - 1][3] > best[0]):
                best = (pcs[s][2] - pcs[e - 1][3], s, e)
        if best is None:
            out += pcs[i:j]
        else:
            _, s, e = best
            a, b = pcs[s][0], pcs[e - 1][1]
            m = 0.5 * (a + b)
            out += pcs[i:s] + [(a, m, pcs[s][2], pcs[s][2]), (m, b, pcs[e - 1][3], pcs[e - 1][3])] + pcs[e:j]
        i = j
    return Profile(tuple(out), omega.left_tail, omega.right_tail)


def _prepared(omega: Profile, tol: ToleranceSet) -> Profile:
    return sharpen(omega, tol.position, tol.jump / tol.position)


def find_witnesses(omega: Profile, T: float, pair: ValidatedFluxPair, conn: Connection, tol: ToleranceSet | None = None, n: int = N_SAMPLES) -> list[Candidate]:
    """Candidate (class, L, R) triples suggested by the traces at 0."""
    tol = tol or ToleranceSet()
    omega = _prepared(omega, tol)
    u_l, u_r = omega.limits(0.0)
    tags = trace_set_tags(pair, conn, u_l, u_r, tol.trace)
    smp = _Samples(omega, T, pair, n=n)
    out: list[Candidate] = []

    def add(c):
        if all(not _same_candidate(c, d) for d in out):
            out.append(c)

    if "T1" in tags:
        mask = smp.inside(0.0, math.inf)
        g = T * pair.f_r.d1(smp.V) - smp.X

        def speed_gap(x, v):
            return T * pair.f_r.d1(v) - x

        for thr in (0.0, -tol.position):
            R = _last_crossing(smp, mask, g, thr, speed_gap)
            add(Candidate("A1", None, 0.0 if R is None else R, "T1"))
    if "T2" in tags:
        mask = smp.inside(-math.inf, 0.0)
        g = T * pair.f_l.d1(smp.V) - smp.X

        def speed_gap_l(x, v):
            return T * pair.f_l.d1(v) - x

        for thr in (0.0, tol.position):
            L = _first_crossing(smp, mask, g, thr, speed_gap_l)
            add(Candidate("A2", 0.0 if L is None else L, None, "T2"))
    for tag in ("T3minus", "T3plus"):
        if tag in tags:
            add(Candidate("A3", 0.0, 0.0, tag))
    if "AB" in tags:
        L_star = _plateau_end(smp, smp.inside(-math.inf, 0.0), conn.A, tol.trace, -1)
        R_star = _plateau_end(smp, smp.inside(0.0, math.inf), conn.B, tol.trace, +1)
        L = min(max(L_star, T * pair.f_l.d1(conn.A)), 0.0)
        R = max(min(R_star, T * pair.f_r.d1(conn.B)), 0.0)
        # L=0 (R=0) relaxes the bound on the left (right) side to the shifted one
        for cl, cr in ((L, R), (L, 0.0), (0.0, R), (0.0, 0.0)):
            add(Candidate("A3", cl, cr, "AB"))
        # emission that began after a crossing phase leaves refracted lines beyond a plateau
        dl, dr = pair.f_l.d1, pair.f_r.d1
        mask = smp.inside(-math.inf, L)
        g = T * dl(smp.V) - smp.X
        for thr in (0.0, tol.position):
            L0 = _first_crossing(smp, mask, g, thr, lambda x, v: T * dl(v) - x)
            if L0 is not None and L0 < L:
                add(Candidate("A3", L, R, "AB_late_left", L0))
        mask = smp.inside(R, math.inf)
        g = T * dr(smp.V) - smp.X
        for thr in (0.0, -tol.position):
            R0 = _last_crossing(smp, mask, g, thr, lambda x, v: T * dr(v) - x)
            if R0 is not None and R0 > R:
                add(Candidate("A3", L, R, "AB_late_right", R0))
    return out


def _same_candidate(c: Candidate, d: Candidate) -> bool:
    def close(p, q):
        if p is None or q is None:
            return p is q
        return abs(p - q) <= 1e-12 * (1.0 + abs(p))

    return c.cls == d.cls and c.tag == d.tag and close(c.L, d.L) and close(c.R, d.R)


# ---------------------------------------------------------------------------
# checks


class _Collector:
    """Keeps the worst sample per (condition, kind)."""

    def __init__(self):
        self.worst: dict[tuple[str, str], Violation] = {}

    def add(self, cond, x, margin, kind):
        key = (cond, kind)
        cur = self.worst.get(key)
        if cur is None or (margin is not None and cur.margin is not None and margin < cur.margin):
            self.worst[key] = Violation(cond, float(x), None if margin is None else float(margin), kind)

    def nonstrict(self, cond, x, margin, tol):
        # rounding slack: witnesses placed exactly at the tolerance land on -tol
        bad = np.flatnonzero(margin < -tol - STRICT_MARGIN * (1.0 + tol))
        if bad.size:
            i = bad[np.argmin(margin[bad])]
            self.add(cond, x[i], margin[i], "hard")

    def strict(self, cond, x, margin, tol, scale=0.0):
        eps = STRICT_MARGIN * (1.0 + abs(scale))
        hard = np.flatnonzero(margin < -tol)
        if hard.size:
            i = hard[np.argmin(margin[hard])]
            self.add(cond, x[i], margin[i], "hard")
        border = np.flatnonzero((margin >= -tol) & (margin <= eps))
        if border.size:
            i = border[np.argmin(margin[border])]
            self.add(cond, x[i], margin[i], "boundary")

    @property
    def violations(self) -> list[Violation]:
        order = {"hard": 0, "boundary": 1}
        return sorted(self.worst.values(), key=lambda v: (order[v.kind], v.x))


def _ordered_diffs(values, mask):
    """Differences of consecutive finite masked samples, with the x of the later one."""
    idx = np.flatnonzero(mask & np.isfinite(values))
    return idx, np.diff(values[idx])


def _check_jumps(col: _Collector, omega: Profile, tol: ToleranceSet):
    for x, lo, hi in omega.jumps():
        if x != 0.0 and lo < hi - tol.jump:
            col.add("lax_jump", x, lo - hi, "hard")


def _check_candidate(omega, T, pair, conn, cand: Candidate, tol: ToleranceSet, n: int) -> list[Violation]:
    col = _Collector()
    _check_jumps(col, omega, tol)
    L, R = cand.L, cand.R
    smp = _Samples(omega, T, pair, cuts=(L, R, cand.edge), n=n)
    X, V = smp.X, smp.V
    u_l, u_r = omega.limits(0.0)
    dl, dr = pair.f_l.d1, pair.f_r.d1
    if cand.tag.startswith("AB_late"):
        _check_late(col, smp, T, pair, conn, cand, tol)
        return col.violations

    if cand.cls == "A1":
        if not R > 0:
            col.add("positive_witness", 0.0, R, "hard")
        m = smp.inside(-math.inf, 0.0)
        col.nonstrict("speed_bound_left", X[m], T * (dl(V[m]) - dl(u_l)) - X[m], tol.position)
        m = smp.inside(0.0, R)
        col.nonstrict("speed_bound_refracted", X[m], T * dr(V[m]) - X[m], tol.position)
        m = smp.strictly_inside(R, math.inf)
        col.strict("speed_bound_outgoing", X[m], X[m] - T * dr(V[m]), tol.strict, R)
    elif cand.cls == "A2":
        if not L < 0:
            col.add("positive_witness", 0.0, -L, "hard")
        m = smp.strictly_inside(-math.inf, L)
        col.strict("speed_bound_outgoing", X[m], T * dl(V[m]) - X[m], tol.strict, L)
        m = smp.inside(L, 0.0)
        col.nonstrict("speed_bound_refracted", X[m], X[m] - T * dl(V[m]), tol.position)
        m = smp.inside(0.0, math.inf)
        col.nonstrict("speed_bound_right", X[m], X[m] + T * (dr(u_r) - dr(V[m])), tol.position)
    else:
        if cand.tag == "AB":
            _plateaus(col, smp, conn, L, R, tol)
            # the interface only emits left values <= A and right values >= B, so
            # other values need their foot strictly on their own side of 0
            m = smp.inside(-math.inf, 0.0) & ~smp.strictly_inside(L, 0.0) & (V > conn.A + tol.trace)
            col.strict("emission_range_left", X[m], T * dl(V[m]) - X[m], tol.strict, T)
            m = smp.inside(0.0, math.inf) & ~smp.strictly_inside(0.0, R) & (V < conn.B - tol.trace)
            col.strict("emission_range_right", X[m], X[m] - T * dr(V[m]), tol.strict, T)
        m = smp.inside(-math.inf, L)
        shift = dl(u_l) if L == 0.0 else 0.0
        col.nonstrict("speed_bound_left", X[m], T * (dl(V[m]) - shift) - X[m], tol.position)
        m = smp.inside(R, math.inf)
        shift = dr(u_r) if R == 0.0 else 0.0
        col.nonstrict("speed_bound_right", X[m], X[m] + T * (shift - dr(V[m])), tol.position)

    phi, regions = _phi_values(smp, cand.cls, L, R, T, pair)
    if "mid" in regions:
        bad = regions["mid"] & np.isnan(phi)
        if bad.any():
            col.add("domain", X[np.flatnonzero(bad)[0]], None, "hard")
    used = np.zeros(X.shape, dtype=bool)
    for m in regions.values():
        used |= m
    # A3 feet of emitted lines are virtual, so each half-line is compared on its own
    parts = [used] if cand.cls != "A3" else [used & (X < 0) | used & (X == 0) & (smp.S < 0), used & ((X > 0) | (X == 0) & (smp.S > 0))]
    for part in parts:
        idx, d = _ordered_diffs(phi, part)
        if d.size:
            col.nonstrict("foot_monotone", X[idx[1:]], d, tol.mono)

    if cand.cls in ("A1", "A2"):
        if cand.cls == "A1":
            mid = smp.inside(0.0, R)
            psi = _crossing_time(pair.f_r, X, V, T)
            sign = -1.0  # decreasing
        else:
            mid = smp.inside(L, 0.0)
            psi = _crossing_time(pair.f_l, X, V, T)
            sign = 1.0  # increasing
        idx, d = _ordered_diffs(psi, mid)
        # jumps are covered by the Lax check; only compare distinct abscissae
        keep = np.diff(X[idx]) > 0
        if np.any(keep):
            col.strict("crossing_time_strict", X[idx[1:]][keep], sign * d[keep], tol.strict, T)
    return col.violations


def _plateaus(col, smp, conn, L, R, tol):
    X, V = smp.X, smp.V
    m = smp.strictly_inside(L, 0.0)
    col.nonstrict("plateau_left", X[m], tol.trace - np.abs(V[m] - conn.A), 0.0)
    m = smp.strictly_inside(0.0, R)
    col.nonstrict("plateau_right", X[m], tol.trace - np.abs(V[m] - conn.B), 0.0)


def _check_late(col, smp, T, pair, conn, cand, tol):
    """(A, B) traces reached after a crossing phase.

    One side reads, outward from 0: the emitted plateau, lines refracted
    before the emission began, then lines from t=0. The other side holds its
    plateau and lines from t=0 only.
    """
    X, V = smp.X, smp.V
    dl, dr = pair.f_l.d1, pair.f_r.d1
    L, R, edge = cand.L, cand.R, cand.edge
    _plateaus(col, smp, conn, L, R, tol)
    phi = np.full(X.shape, np.nan)
    if cand.tag == "AB_late_left":
        start = T - L / dl(conn.A)
        m = smp.strictly_inside(-math.inf, edge)
        col.strict("speed_bound_outgoing", X[m], T * dl(V[m]) - X[m], tol.strict, edge)
        band = smp.inside(edge, L)
        col.nonstrict("speed_bound_refracted", X[band], X[band] - T * dl(V[band]), tol.position)
        col.nonstrict("emission_range_left", X[band], conn.A - V[band], tol.trace)
        col.nonstrict("emission_order", X[band], dl(V[band]) * (T - start) - X[band], tol.position)
        right = smp.inside(R, math.inf)
        col.nonstrict("speed_bound_right", X[right], X[right] - T * dr(V[right]), tol.position)
        m = right & (V < conn.B - tol.trace)
        col.strict("emission_range_right", X[m], X[m] - T * dr(V[m]), tol.strict, T)
        col.nonstrict("plateau_duration", np.array([R]), np.array([dr(conn.B) * (T - start) - R]), tol.position)
        left = smp.inside(-math.inf, edge)
        phi[left] = _foot_outer(pair.f_l, X[left], V[left], T)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi[band] = _foot_refracted_left(pair, X[band], V[band], T)
        phi[right] = _foot_outer(pair.f_r, X[right], V[right], T)
        psi, sign = _crossing_time(pair.f_l, X, V, T), 1.0
    else:
        start = T - R / dr(conn.B)
        m = smp.strictly_inside(edge, math.inf)
        col.strict("speed_bound_outgoing", X[m], X[m] - T * dr(V[m]), tol.strict, edge)
        band = smp.inside(R, edge)
        col.nonstrict("speed_bound_refracted", X[band], T * dr(V[band]) - X[band], tol.position)
        col.nonstrict("emission_range_right", X[band], V[band] - conn.B, tol.trace)
        col.nonstrict("emission_order", X[band], X[band] - dr(V[band]) * (T - start), tol.position)
        left = smp.inside(-math.inf, L)
        col.nonstrict("speed_bound_left", X[left], T * dl(V[left]) - X[left], tol.position)
        m = left & (V > conn.A + tol.trace)
        col.strict("emission_range_left", X[m], T * dl(V[m]) - X[m], tol.strict, T)
        col.nonstrict("plateau_duration", np.array([L]), np.array([L - dl(conn.A) * (T - start)]), tol.position)
        right = smp.inside(edge, math.inf)
        phi[left] = _foot_outer(pair.f_l, X[left], V[left], T)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi[band] = _foot_refracted_right(pair, X[band], V[band], T)
        phi[right] = _foot_outer(pair.f_r, X[right], V[right], T)
        psi, sign = _crossing_time(pair.f_r, X, V, T), -1.0
    bad = band & np.isnan(phi)
    if bad.any():
        col.add("domain", X[np.flatnonzero(bad)[0]], None, "hard")
    idx, d = _ordered_diffs(phi, left | band | right)
    if d.size:
        col.nonstrict("foot_monotone", X[idx[1:]], d, tol.mono)
    idx, d = _ordered_diffs(psi, band)
    keep = np.diff(X[idx]) > 0
    if np.any(keep):
        col.strict("crossing_time_strict", X[idx[1:]][keep], sign * d[keep], tol.strict, T)


def check_membership(omega: Profile, T: float, pair: ValidatedFluxPair, conn: Connection, tol: ToleranceSet | None = None, n: int = N_SAMPLES) -> AttainabilityReport:
    """Membership verdict; the first candidate without violations wins."""
    if not T > 0:
        raise ValueError("T must be positive")
    tol = tol or ToleranceSet()
    omega = _prepared(omega, tol)
    cands = find_witnesses(omega, T, pair, conn, tol, n)
    if not cands:
        v = Violation("trace_set", 0.0, None, "hard")
        return AttainabilityReport("not_member", "none", None, None, [v], tol, [])
    results = []
    for c in cands:
        viol = _check_candidate(omega, T, pair, conn, c, tol, n)
        results.append((c, viol))
        if not viol:
            return AttainabilityReport("member", c.cls, c.L, c.R, [], tol, _cand_dicts(results))
    # report the candidate closest to passing
    c, viol = min(results, key=lambda cv: (len([v for v in cv[1] if v.kind == "hard"]), len(cv[1])))
    return AttainabilityReport("not_member", "none", c.L, c.R, viol, tol, _cand_dicts(results))


def _cand_dicts(results):
    return [dict(c.to_dict(), violations=[v.to_dict() for v in viol]) for c, viol in results]


# ---------------------------------------------------------------------------
# slope route


def _segment_classes(smp: _Samples, cls, L, R):
    mid = 0.5 * (smp.a + smp.b)
    if cls == "A1":
        return np.where(mid < 0, "left", np.where(mid < R, "mid", "right"))
    if cls == "A2":
        return np.where(mid < L, "left", np.where(mid < 0, "mid", "right"))
    return np.where(mid < L, "left", np.where(mid > R, "right", "plateau"))


def slope_verdicts(omega: Profile, T: float, pair: ValidatedFluxPair, conn: Connection, cls: str, L=None, R=None, n: int = N_SAMPLES, tol: float = 1e-9):
    """Per-segment verdicts from the upper bound on the right Dini derivative.

    On each affine segment the derivative is the slope s; the bound is
    evaluated at the sampled points. Returns a list of (x0, x1, region, ok).
    """
    cls = _norm_cls(cls)
    L, R = _default_witnesses(cls, L, R)
    smp = _Samples(omega, T, pair, cuts=(L, R), n=n)
    regions = _segment_classes(smp, cls, L, R)
    t = np.linspace(0.0, 1.0, n + 2)
    out = []
    for i, reg in enumerate(regions):
        a, b, ua, ub = smp.a[i], smp.b[i], smp.ua[i], smp.ub[i]
        s = (ub - ua) / (b - a)
        x = a + t * (b - a)
        v = ua + t * (ub - ua)
        if reg == "plateau":
            ok = True
        elif reg == "left" or (reg == "right"):
            f = pair.f_l if reg == "left" else pair.f_r
            bound = 1.0 / (T * f.d2(v))
            ok = bool(np.all(s <= bound + tol * (1.0 + np.abs(bound))))
        else:
            ok = _refracted_slope_ok(pair, cls, x, v, s, T, tol)
        out.append((float(a), float(b), str(reg), ok))
    return out


def _refracted_slope_ok(pair, cls, x, v, s, T, tol):
    if cls == "A1":
        home, other, target, branch = pair.f_r, pair.f_l, "l", "+"
    else:
        home, other, target, branch = pair.f_l, pair.f_r, "r", "-"
    g = _transfer(pair, target, branch, home(v))
    if np.any(np.isnan(g)):
        return False
    p, q = other.d1(g), other.d2(g)
    h1, h2 = home.d1(v), home.d2(v)
    num = h1 * p**2
    den = q * h1**2 * (h1 * T - x) + x * p**2 * h2
    with np.errstate(divide="ignore", invalid="ignore"):
        # for A2 both h1 and x are negative, so num and den share the A1 signs after flipping
        bound = num / den
    ok_phi = np.all((den == 0) | (s <= bound + tol * (1.0 + np.abs(bound))))
    # strict monotonicity of the crossing time: h1 - x*h2*s keeps the sign of h1
    margin = (h1 - x * h2 * s) * np.sign(h1)
    ok_psi = np.all(margin > STRICT_MARGIN * (1.0 + np.abs(h1)))
    return bool(ok_phi and ok_psi)


def monotone_verdicts(omega: Profile, T: float, pair: ValidatedFluxPair, conn: Connection, cls: str, L=None, R=None, n: int = N_SAMPLES, tol: float = 1e-9):
    """Per-segment verdicts from monotonicity of the foot and crossing-time maps."""
    cls = _norm_cls(cls)
    L, R = _default_witnesses(cls, L, R)
    smp = _Samples(omega, T, pair, cuts=(L, R), n=n)
    regions = _segment_classes(smp, cls, L, R)
    phi, _ = _phi_values(smp, cls, L, R, T, pair)
    home = pair.f_r if cls == "A1" else pair.f_l
    psi = _crossing_time(home, smp.X, smp.V, T)
    sign = -1.0 if cls == "A1" else 1.0
    out = []
    for i, reg in enumerate(regions):
        m = smp.seg == i
        a, b = smp.a[i], smp.b[i]
        if reg == "plateau":
            ok = True
        else:
            vals = phi[m]
            if np.any(np.isnan(vals)):
                ok = False
            else:
                ok = bool(np.all(np.diff(vals) >= -tol))
            if ok and reg == "mid":
                # same strict margin as the slope route, integrated over one sample step
                d = sign * np.diff(psi[m])
                step = np.diff(smp.X[m])
                ok = bool(np.all(d > STRICT_MARGIN * step))
        out.append((float(a), float(b), str(reg), ok))
    return out
