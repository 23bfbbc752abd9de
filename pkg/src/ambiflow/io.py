"""JSON and CSV serialization for CDFs, balls, bands and fields.

Floats are written as decimal strings with 17 significant digits, which
round-trips every IEEE double exactly.
"""
from __future__ import annotations

import csv
import io as _io
import math

import numpy as np

from .ambiguity import AmbiguityBall
from .cdf_core import PiecewiseCdf, Segment, SteppedCdf, SupportInterval
from .envelope import AmbiguityBand
from .errors import DomainError
from .propagation import CdfField, ScalarField, SpaceTimeGrid


def fmt(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def cdf_to_json(F) -> dict:
    out = {"support": [fmt(F.support.lo), fmt(F.support.hi)]}
    if isinstance(F, SteppedCdf):
        out["kind"] = "stepped"
        out["atoms"] = [[fmt(t), fmt(c)] for t, c in zip(F.locations, F.masses)]
    elif isinstance(F, PiecewiseCdf):
        out["kind"] = "piecewise"
        out["segments"] = [
            {"kind": s.kind, "t_beg": fmt(s.t_beg), "t_end": fmt(s.t_end),
             "params": [fmt(p) for p in s.params]}
            for s in F.segments
        ]
    else:
        raise DomainError(f"cannot serialize {type(F).__name__}")
    return out


def cdf_from_json(obj: dict):
    support = SupportInterval(float(obj["support"][0]), float(obj["support"][1]))
    kind = obj.get("kind")
    if kind == "stepped":
        atoms = np.array([[float(t), float(c)] for t, c in obj["atoms"]])
        return SteppedCdf(atoms[:, 0], atoms[:, 1], support)
    if kind == "piecewise":
        segs = [Segment(rec["kind"], float(rec["t_beg"]), float(rec["t_end"]),
                        tuple(float(p) for p in rec["params"])) for rec in obj["segments"]]
        return PiecewiseCdf(segs, support)
    raise DomainError(f"unknown CDF kind {kind!r}")


def ball_to_json(ball: AmbiguityBall) -> dict:
    return {"center": cdf_to_json(ball.center), "radius": fmt(ball.radius),
            "support": [fmt(ball.support.lo), fmt(ball.support.hi)]}


def ball_from_json(obj: dict) -> AmbiguityBall:
    return AmbiguityBall(cdf_from_json(obj["center"]), float(obj["radius"]),
                         SupportInterval(float(obj["support"][0]), float(obj["support"][1])))


def band_to_json(band: AmbiguityBand) -> dict:
    return {
        "lower": cdf_to_json(band.lower),
        "upper": cdf_to_json(band.upper),
        "rho": None if band.rho is None else fmt(band.rho),
        "support": [fmt(band.support.lo), fmt(band.support.hi)],
        "uninformative": band.uninformative,
    }


def band_from_json(obj: dict) -> AmbiguityBand:
    rho = None if obj.get("rho") is None else float(obj["rho"])
    return AmbiguityBand(cdf_from_json(obj["lower"]), cdf_from_json(obj["upper"]), rho,
                         SupportInterval(float(obj["support"][0]), float(obj["support"][1])),
                         bool(obj.get("uninformative", False)))


# ---------------------------------------------------------------------------
# CSV


def _write_rows(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def scalar_field_csv(field: ScalarField, name: str | None = None) -> str:
    name = name or field.name
    g = field.grid
    rows = ((x, t, field.values[it, ix]) for it, ix, x, t in g.nodes())
    return _write_rows(["x", "t", name], rows)


def cdf_field_csv(field: CdfField) -> str:
    g = field.grid
    if field.values is None:
        raise DomainError("field has no U axis")
    rows = ((x, t, u, field.values[it, ix, iu])
            for it, ix, x, t in g.nodes() for iu, u in enumerate(g.Us))
    return _write_rows(["x", "t", "U", "F"], rows)


def table_csv(header, rows) -> str:
    return _write_rows(list(header), rows)


def read_csv(text: str):
    """Header and float matrix of a CSV written by this module."""
    reader = csv.reader(_io.StringIO(text))
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return header, data.reshape(-1, len(header))


def scalar_field_from_csv(text: str) -> ScalarField:
    header, data = read_csv(text)
    xs = np.unique(data[:, 0])
    ts = np.unique(data[:, 1])
    vals = data[:, 2].reshape(ts.size, xs.size)
    return ScalarField(SpaceTimeGrid(xs, ts), vals, header[2])


def cdf_field_values_from_csv(text: str):
    """``(grid, values)`` with ``values[it, ix, iU]``."""
    _, data = read_csv(text)
    xs, ts, Us = (np.unique(data[:, k]) for k in range(3))
    vals = data[:, 3].reshape(ts.size, xs.size, Us.size)
    return SpaceTimeGrid(xs, ts, Us), vals
