"""Piecewise-affine profiles with constant tails."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """A bounded piecewise-affine function of x.

    ``pieces`` holds contiguous (x_start, x_end, u_start, u_end) tuples; the
    profile equals ``left_tail`` before the first piece and ``right_tail``
    after the last. One-sided limits exist everywhere. The interface x=0 is
    always treated as a breakpoint by the algorithms, whether or not a piece
    ends there.
    """

    pieces: tuple
    left_tail: float
    right_tail: float

    def __post_init__(self):
        pcs = tuple(tuple(float(v) for v in p) for p in self.pieces)
        if not pcs and self.left_tail != self.right_tail:
            # bare jump at the interface
            lt, rt = float(self.left_tail), float(self.right_tail)
            pcs = ((-1.0, 0.0, lt, lt), (0.0, 1.0, rt, rt))
        object.__setattr__(self, "pieces", pcs)
        object.__setattr__(self, "left_tail", float(self.left_tail))
        object.__setattr__(self, "right_tail", float(self.right_tail))
        for i, p in enumerate(pcs):
            if len(p) != 4:
                raise InvariantViolation(f"piece {i} must have 4 numbers, got {len(p)}")
            if not all(math.isfinite(v) for v in p):
                raise InvariantViolation(f"piece {i} has non-finite entries")
            if not p[0] < p[1]:
                raise InvariantViolation(f"piece {i} has x_start >= x_end")
            if i and p[0] != pcs[i - 1][1]:
                kind = "overlaps" if p[0] < pcs[i - 1][1] else "leaves a gap after"
                raise InvariantViolation(f"piece {i} {kind} piece {i - 1}")
        if not (math.isfinite(self.left_tail) and math.isfinite(self.right_tail)):
            raise InvariantViolation("tails must be finite")
        arr = np.array(pcs, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "_arr", arr)

    # -- construction ------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls((), value, value)

    @classmethod
    def step(cls, x0: float, left: float, right: float, span: float = 1.0) -> "Profile":
        return cls(((x0 - span, x0, left, left), (x0, x0 + span, right, right)), left, right)

    @classmethod
    def from_points(cls, xs, us, left_tail=None, right_tail=None, merge: bool = True) -> "Profile":
        """Piecewise-linear interpolant; repeated x values encode jumps."""
        xs = np.asarray(xs, dtype=float)
        us = np.asarray(us, dtype=float)
        if xs.size != us.size or xs.size < 1:
            raise InvariantViolation("need matching, non-empty x and u samples")
        if np.any(np.diff(xs) < 0):
            raise InvariantViolation("sample abscissae must be nondecreasing")
        pieces = [
            (xs[i], xs[i + 1], us[i], us[i + 1]) for i in range(xs.size - 1) if xs[i + 1] > xs[i]
        ]
        lt = us[0] if left_tail is None else left_tail
        rt = us[-1] if right_tail is None else right_tail
        prof = cls(tuple(pieces), lt, rt)
        return prof.simplified() if merge else prof

    @classmethod
    def from_cells(cls, centers, values, dx: float, interface: float = 0.0, traces=None) -> "Profile":
        """Linearize cell averages: lines through cell centers, a jump allowed at the interface.

        Half-cells at the ends are held constant. Next to the interface they are
        constant too, unless ``traces`` gives the one-sided values to reach at it.
        """
        centers = np.asarray(centers, dtype=float)
        values = np.asarray(values, dtype=float)
        left = centers < interface
        xs, us = [], []
        for side, mask in enumerate((left, ~left)):
            c, v = centers[mask], values[mask]
            if c.size:
                first, last = v[0], v[-1]
                if traces is not None:
                    if side == 0:
                        last = traces[0]
                    else:
                        first = traces[1]
                xs.extend([c[0] - 0.5 * dx, *c, c[-1] + 0.5 * dx])
                us.extend([first, *v, last])
        return cls.from_points(xs, us, merge=False)

    def simplified(self, tol: float = 1e-12) -> "Profile":
        """Merge neighbouring pieces that are continuous and collinear."""
        out: list[list[float]] = []
        for p in self.pieces:
            if out:
                q = out[-1]
                slope_q = (q[3] - q[2]) / (q[1] - q[0])
                slope_p = (p[3] - p[2]) / (p[1] - p[0])
                if abs(q[3] - p[2]) <= tol and abs(slope_q - slope_p) <= tol * (1 + abs(slope_q)):
                    q[1], q[3] = p[1], p[3]
                    continue
            out.append(list(p))
        return Profile(tuple(tuple(p) for p in out), self.left_tail, self.right_tail)

    def scaled(self, lam: float) -> "Profile":
        """x -> lam * x."""
        return Profile(tuple((lam * a, lam * b, u, v) for a, b, u, v in self.pieces), self.left_tail, self.right_tail)

    def shifted(self, du: float) -> "Profile":
        return Profile(tuple((a, b, u + du, v + du) for a, b, u, v in self.pieces), self.left_tail + du, self.right_tail + du)

    # -- evaluation -------------------------------------------------------

    @property
    def x0(self):
        return self._arr[:, 0]

    @property
    def x1(self):
        return self._arr[:, 1]

    @property
    def u0(self):
        return self._arr[:, 2]

    @property
    def u1(self):
        return self._arr[:, 3]

    @property
    def support(self) -> tuple[float, float]:
        if not self.pieces:
            return (0.0, 0.0)
        return (self.pieces[0][0], self.pieces[-1][1])

    def breakpoints(self) -> np.ndarray:
        if not self.pieces:
            return np.empty(0)
        return np.append(self.x0, self.x1[-1])

    def _eval(self, x, side: str):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        if not self.pieces:
            out[...] = self.left_tail
            return out
        x0, x1, u0, u1 = self.x0, self.x1, self.u0, self.u1
        if side == "right":
            idx = np.searchsorted(x0, x, side="right") - 1
        else:
            idx = np.searchsorted(x1, x, side="left")
        idx_c = np.clip(idx, 0, len(x0) - 1)
        w = (x - x0[idx_c]) / (x1[idx_c] - x0[idx_c])
        val = u0[idx_c] + w * (u1[idx_c] - u0[idx_c])
        before = x < x0[0] if side == "right" else x <= x0[0]
        after = x >= x1[-1] if side == "right" else x > x1[-1]
        out[...] = np.where(before, self.left_tail, np.where(after, self.right_tail, val))
        return out

    def __call__(self, x):
        """Right-continuous evaluation."""
        out = self._eval(x, "right")
        return float(out) if np.ndim(x) == 0 else out

    def right_limit(self, x):
        return self(x)

    def left_limit(self, x):
        out = self._eval(x, "left")
        return float(out) if np.ndim(x) == 0 else out

    def limits(self, x: float) -> tuple[float, float]:
        return self.left_limit(x), self.right_limit(x)

    def jumps(self, tol: float = 0.0) -> list[tuple[float, float, float]]:
        """(x, left limit, right limit) at every discontinuity."""
        out = []
        for x in self.breakpoints():
            lo, hi = self.limits(x)
            if abs(lo - hi) > tol:
                out.append((float(x), lo, hi))
        return out

    def value_range(self) -> tuple[float, float]:
        vals = [self.left_tail, self.right_tail]
        if self.pieces:
            vals.extend(self.u0.tolist())
            vals.extend(self.u1.tolist())
        return min(vals), max(vals)

    def primitive(self, x):
        """An antiderivative, exact for the affine pieces (zero at the first breakpoint)."""
        x = np.asarray(x, dtype=float)
        if not self.pieces:
            return self.left_tail * x
        x0, x1, u0, u1 = self.x0, self.x1, self.u0, self.u1
        widths = x1 - x0
        areas = 0.5 * (u0 + u1) * widths
        cum = np.concatenate([[0.0], np.cumsum(areas)])
        idx = np.clip(np.searchsorted(x0, x, side="right") - 1, 0, len(x0) - 1)
        s = np.clip(x - x0[idx], 0.0, widths[idx])
        slope = (u1[idx] - u0[idx]) / widths[idx]
        inside = cum[idx] + s * (u0[idx] + 0.5 * slope * s)
        left = self.left_tail * (x - x0[0])
        right = cum[-1] + self.right_tail * (x - x1[-1])
        return np.where(x < x0[0], left, np.where(x > x1[-1], right, inside))

    def cell_averages(self, edges) -> np.ndarray:
        edges = np.asarray(edges, dtype=float)
        return np.diff(self.primitive(edges)) / np.diff(edges)

    def integral(self, a: float, b: float) -> float:
        p = self.primitive(np.array([a, b]))
        return float(p[1] - p[0])

    # -- io ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "pieces": [list(p) for p in self.pieces],
            "left_tail": self.left_tail,
            "right_tail": self.right_tail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        pieces = d.get("pieces", [])
        lt = d.get("left_tail", pieces[0][2] if pieces else None)
        rt = d.get("right_tail", pieces[-1][3] if pieces else None)
        if lt is None or rt is None:
            raise InvariantViolation("profile without pieces needs both tails")
        return cls(tuple(tuple(p) for p in pieces), lt, rt)


def l1_distance(values, edges, omega: Profile, subsamples: int = 8) -> float:
    """L1 distance between cell values and a profile, by Gauss-Legendre sampling in each cell."""
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(subsamples)
    dx = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = mid[:, None] + 0.5 * dx[:, None] * nodes[None, :]
    diff = np.abs(values[:, None] - omega(pts))
    return float(np.sum(0.5 * dx * (diff @ weights)))


def l1_norm(omega: Profile, a: float, b: float, n: int = 4000) -> float:
    edges = np.linspace(a, b, n + 1)
    return l1_distance(np.zeros(n), edges, omega)
