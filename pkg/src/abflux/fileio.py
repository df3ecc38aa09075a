"""File formats: profiles, flux and connection specs, JSON and CSV output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .flux import (
    ConcaveAdapter,
    Connection,
    FluxError,
    ValidatedFluxPair,
    adapt_concave,
    connection_from_level,
    flux_from_dict,
    greenshields,
    make_connection,
    validate_flux_pair,
)
from .profile import InvariantViolation, Profile


class ParseError(InvariantViolation):
    """Malformed input; the message names the file and the offending line or field."""

    def __init__(self, source, where, message: str):
        self.source, self.where = str(source), where
        super().__init__(f"{source}: {where}: {message}")


# ---------------------------------------------------------------------------
# reading


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(path, "file", exc.strerror or str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno}", exc.msg) from exc


def _number(value, source, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(source, where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ParseError(source, where, "number is not finite")
    return float(value)


def profile_from_dict(d, source="<profile>") -> Profile:
    """Breakpoint form: {"pieces": [[x0, x1, u0, u1], ...], "left_tail": a, "right_tail": b}."""
    if not isinstance(d, dict):
        raise ParseError(source, "top level", "expected a JSON object")
    raw = d.get("pieces", [])
    if not isinstance(raw, list):
        raise ParseError(source, "pieces", "expected a list")
    pieces = []
    for i, p in enumerate(raw):
        if not isinstance(p, list) or len(p) != 4:
            raise ParseError(source, f"pieces[{i}]", "expected [x_start, x_end, u_start, u_end]")
        pieces.append(tuple(_number(v, source, f"pieces[{i}][{j}]") for j, v in enumerate(p)))
    tails = {}
    for key, default in (("left_tail", 2), ("right_tail", 3)):
        if key in d:
            tails[key] = _number(d[key], source, key)
        elif pieces:
            tails[key] = pieces[0 if default == 2 else -1][default]
        else:
            raise ParseError(source, key, "required when there are no pieces")
    try:
        return Profile(tuple(pieces), tails["left_tail"], tails["right_tail"])
    except InvariantViolation as exc:
        raise ParseError(source, "pieces", str(exc)) from exc


def _profile_from_csv(path) -> Profile:
    xs, us = [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(path, "file", exc.strerror or str(exc)) from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise ParseError(path, f"line {lineno}", f"expected 2 columns x,u, got {len(row)}")
            try:
                x, u = float(row[0]), float(row[1])
            except ValueError:
                if not xs:  # header
                    continue
                raise ParseError(path, f"line {lineno}", f"not a number pair: {row}") from None
            if not (math.isfinite(x) and math.isfinite(u)):
                raise ParseError(path, f"line {lineno}", "non-finite value")
            if xs and x < xs[-1]:
                raise ParseError(path, f"line {lineno}", "x values must be nondecreasing")
            xs.append(x)
            us.append(u)
    if len(xs) < 2:
        raise ParseError(path, "file", "need at least two samples")
    return Profile.from_points(xs, us)


def parse_profile(path) -> Profile:
    """Read a profile from breakpoint JSON or from sampled x,u CSV (linear interpolation)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _profile_from_csv(path)
    return profile_from_dict(_load_json(path), path)


def _spec(obj, source):
    """A spec given inline as a dict or as a path to a JSON file."""
    if isinstance(obj, dict):
        return obj, source
    if isinstance(obj, (str, Path)):
        return _load_json(obj), obj
    raise ParseError(source, "spec", "expected an object or a file path")


def flux_from_spec(obj, source="<flux>") -> tuple[ValidatedFluxPair, ConcaveAdapter | None]:
    """Polynomial or spline pair {"fl", "fr", "range"}, or {"lwr": {"vmax", "rhomax", "shape"}}.

    For traffic specs the returned pair acts on u = -rho and the adapter
    converts back; ``vmax`` may be one number or a [left, right] pair.
    """
    d, source = _spec(obj, source)
    try:
        if "lwr" in d:
            lwr = d["lwr"]
            shape = lwr.get("shape", "greenshields")
            if shape != "greenshields":
                raise ParseError(source, "lwr.shape", f"unsupported shape {shape!r}")
            vmax = lwr.get("vmax")
            vl, vr = (vmax, vmax) if not isinstance(vmax, list) else vmax
            rho_max = _number(lwr.get("rhomax"), source, "lwr.rhomax")
            g_l = greenshields(_number(vl, source, "lwr.vmax"), rho_max)
            g_r = greenshields(_number(vr, source, "lwr.vmax"), rho_max)
            return adapt_concave(g_l, g_r, rho_max)
        for key in ("fl", "fr", "range"):
            if key not in d:
                raise ParseError(source, key, "missing")
        lo, hi = (_number(v, source, "range") for v in d["range"])
        pair = validate_flux_pair(flux_from_dict(d["fl"]), flux_from_dict(d["fr"]), (lo, hi), bool(d.get("identical", False)))
        return pair, None
    except (KeyError, TypeError) as exc:
        raise ParseError(source, "flux", f"malformed spec ({exc})") from exc
    except FluxError as exc:
        if isinstance(exc, ParseError):
            raise
        raise FluxError(f"{source}: {exc}") from exc


def connection_from_spec(obj, pair: ValidatedFluxPair, source="<connection>") -> Connection:
    """{"gamma": g} or {"A": a, "B": b}, in the solver's state variable."""
    d, source = _spec(obj, source)
    if "gamma" in d:
        return connection_from_level(pair, _number(d["gamma"], source, "gamma"))
    if "A" in d and "B" in d:
        return make_connection(pair, _number(d["A"], source, "A"), _number(d["B"], source, "B"))
    raise ParseError(source, "connection", 'expected {"gamma": g} or {"A": a, "B": b}')


# ---------------------------------------------------------------------------
# writing


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def write_profile_csv(path, profile: Profile, x_min: float, x_max: float, n: int = 400) -> Path:
    """Columns x,u; every breakpoint appears twice so jumps plot as vertical lines."""
    xs = np.linspace(x_min, x_max, n + 1)
    bps = profile.breakpoints()
    bps = bps[(bps > x_min) & (bps < x_max)]
    rows = [(x, profile(x)) for x in xs]
    rows += [(x, profile.left_limit(x)) for x in bps] + [(x, profile.right_limit(x)) for x in bps]
    rows.sort(key=lambda r: r[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        w.writerows((repr(float(x)), repr(float(u))) for x, u in rows)
    return path


def write_field_csv(path, fld) -> Path:
    """Columns t,x,u with a blank line between time levels (gnuplot blocks)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = fld.grid.centers
    with open(path, "w", newline="") as fh:
        fh.write("t,x,u\n")
        for t, s in zip(fld.times, fld.states):
            for xi, ui in zip(x, s):
                fh.write(f"{float(t)!r},{float(xi)!r},{float(ui)!r}\n")
            fh.write("\n")
    return path
