"""Upper/lower CDF envelopes at W1 distance rho and the ambiguity bands they form.

For a discrete CDF the upper envelope is assembled in closed form from
hyperbolic arcs (see :func:`envelope_construction`).  :func:`envelope_oracle`
solves the defining area equation by bisection instead and is kept
independent of the closed form so the two can be checked against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ambiguity import AmbiguityBall
from .cdf_core import (
    PiecewiseCdf,
    Segment,
    SteppedCdf,
    SupportInterval,
    generalized_inverse,
    integrate,
    left_inverse,
    reflect,
    w1_distance,
)
from .errors import DomainError, UninformativeBandError


@dataclass(frozen=True)
class EnvelopeConstruction:
    """Indices and times produced while building an upper envelope.

    ``j`` holds ``j_1 .. j_{kmax+1}``; ``i`` holds ``i_1 .. i_{kmax}`` followed
    by ``N + 1``; ``tau[l]`` is defined for ``l`` in ``[i_1 : N]``.
    """

    j: tuple
    i: tuple
    tau: dict
    k_max: int
    cdf: PiecewiseCdf


def _b_table(t: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``b[i, j] = sum_{k=j}^{i} (t_k - t_j) c_k`` for ``j <= i``, else 0."""
    diff = (t[:, None] - t[None, :]) * c[:, None]
    diff = np.tril(diff)
    return np.cumsum(diff, axis=0) * np.tri(t.size)


def upper_bound_rho(F: SteppedCdf) -> float:
    """``b_{N,0} = int_a^b (1 - F)``: radii at or above it give the trivial upper envelope."""
    return float(np.dot(F.locations - F.support.lo, F.masses))


def lower_bound_rho(F: SteppedCdf) -> float:
    """``int_a^b F``: the mirror bound for the lower envelope."""
    return float(np.dot(F.support.hi - F.locations, F.masses))


def envelope_construction(F: SteppedCdf, rho: float) -> EnvelopeConstruction:
    """Closed-form upper envelope of a discrete CDF, with its index bookkeeping."""
    rho = float(rho)
    if not rho > 0:
        raise DomainError(f"envelope radius must be positive, got {rho}")
    a = F.support.lo
    t = np.concatenate(([a], F.locations))
    c = np.concatenate(([0.0], F.masses))
    z = np.concatenate(([0.0], F.cumulative))
    N = F.locations.size
    b = _b_table(t, c)
    if not b[N, 0] > rho:
        raise UninformativeBandError(
            f"rho={rho:.6g} reaches the admissible bound b_N0={b[N, 0]:.6g}")

    def bval(i, j):
        return b[i, j] if 0 <= j <= i <= N else 0.0

    js = [0]
    i_s = [int(np.argmax(b[1:, 0] >= rho)) + 1]
    while True:
        jk, ik = js[-1], i_s[-1]
        cand = [j for j in range(jk, ik + 1) if b[ik, j] >= rho]
        js.append(max(cand) + 1)
        if b[N, js[-1]] <= rho:
            break
        nxt = [i for i in range(ik + 1, N + 1) if b[i, js[-1]] >= rho]
        i_s.append(nxt[0])
    k_max = len(i_s)
    i_s.append(N + 1)

    tau = {}
    segments = []
    for k in range(k_max):
        jk, jn = js[k], js[k + 1]
        ik, inext = i_s[k], i_s[k + 1]
        mass_from = np.cumsum(c[jn:])  # sum_{l=jn}^{ell} c_l at index ell - jn
        for ell in range(ik, inext):
            tau[ell] = t[jn] - (rho - bval(ell, jn)) / mass_from[ell - jn]
        # arcs anchored at the atom t_{i_k}
        for ell in range(jk, jn):
            y_ell = z[ik - 1] + (rho - bval(ik - 1, ell)) / (t[ik] - t[ell])
            end = t[ell + 1] if ell <= jn - 2 else tau[ik]
            if end > t[ell]:
                amp = (y_ell - z[ell]) * (t[ik] - t[ell])
                segments.append(Segment("hyperbolic", t[ell], end, (z[ell], amp, t[ik])))
        # arcs through the times tau_ell, anchored at t_{ell+1}
        last = inext - 1
        for ell in range(ik, inext):
            if ell < last:
                end = tau[ell + 1]
            elif k < k_max - 1:
                end = t[jn]
            else:
                break  # value 1 from tau_N on
            if end > tau[ell]:
                amp = (z[ell] - z[jn - 1]) * (t[ell + 1] - tau[ell])
                segments.append(Segment("hyperbolic", tau[ell], end, (z[jn - 1], amp, t[ell + 1])))
    cdf = PiecewiseCdf.from_finite(segments, F.support)
    return EnvelopeConstruction(tuple(js), tuple(i_s), tau, k_max, cdf)


def _dirac_piecewise(F: SteppedCdf) -> PiecewiseCdf:
    return F.piecewise


def upper_envelope_discrete(F: SteppedCdf, rho: float) -> PiecewiseCdf:
    """Pointwise supremum of all CDFs on the support within W1 distance ``rho`` of ``F``."""
    if not rho > 0:
        raise DomainError(f"envelope radius must be positive, got {rho}")
    if F.support.width == 0:
        return _dirac_piecewise(F)
    return envelope_construction(F, rho).cdf


def lower_envelope_discrete(F: SteppedCdf, rho: float) -> PiecewiseCdf:
    """Pointwise infimum, obtained by reflecting the upper envelope of the reflected CDF."""
    if not rho > 0:
        raise DomainError(f"envelope radius must be positive, got {rho}")
    if F.support.width == 0:
        return _dirac_piecewise(F)
    try:
        up = upper_envelope_discrete(reflect(F), rho)
    except UninformativeBandError:
        raise UninformativeBandError(
            f"rho={rho:.6g} reaches the admissible bound int F={lower_bound_rho(F):.6g}") from None
    return reflect(up, F.support)


def trivial_upper(support: SupportInterval) -> PiecewiseCdf:
    """Step to 1 at the left end of the support."""
    return PiecewiseCdf([Segment("constant", support.lo, math.inf, (1.0,))], support)


def trivial_lower(support: SupportInterval) -> PiecewiseCdf:
    """Step to 1 at the right end of the support."""
    if support.width == 0:
        return trivial_upper(support)
    return PiecewiseCdf.from_finite([Segment("constant", support.lo, support.hi, (0.0,))], support)


# ---------------------------------------------------------------------------
# bisection oracle


def _stepped_area_up(F: SteppedCdf, t, y0, zval):
    """``int_{y0}^{z} (F^-1(y) - t) dy`` for stepped ``F``; arrays broadcast over rows."""
    lo_lv = np.concatenate(([0.0], F.cumulative[:-1]))
    hi_lv = F.cumulative
    ov = np.clip(np.minimum(zval[:, None], hi_lv) - np.maximum(y0[:, None], lo_lv), 0.0, None)
    return np.sum((F.locations[None, :] - t[:, None]) * ov, axis=1)


def _stepped_area_low(F: SteppedCdf, t, y0, zval):
    """``int_{z}^{y0} (t - F^-1(y)) dy``."""
    lo_lv = np.concatenate(([0.0], F.cumulative[:-1]))
    hi_lv = F.cumulative
    ov = np.clip(np.minimum(y0[:, None], hi_lv) - np.maximum(zval[:, None], lo_lv), 0.0, None)
    return np.sum((t[:, None] - F.locations[None, :]) * ov, axis=1)


def _oracle_stepped(F: SteppedCdf, rho: float, t: np.ndarray, side: str, tol: float):
    a, b = F.support.lo, F.support.hi
    y0 = np.asarray(F(t), dtype=float).reshape(t.shape)
    if side == "up":
        area = lambda zz: _stepped_area_up(F, t, y0, zz)
        lo, hi = y0.copy(), np.ones_like(t)
        saturated = area(hi) <= rho
    else:
        area = lambda zz: _stepped_area_low(F, t, y0, zz)
        lo, hi = np.zeros_like(t), y0.copy()
        saturated = area(lo) <= rho
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        ok = area(mid) <= rho
        if side == "up":
            lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
        else:
            lo, hi = np.where(ok, lo, mid), np.where(ok, mid, hi)
    if side == "up":
        out = np.where(saturated, 1.0, 0.5 * (lo + hi))
        return np.where(t < a, 0.0, out)
    out = np.where(saturated, 0.0, 0.5 * (lo + hi))
    return np.where(t >= b, 1.0, out)


def _oracle_general_scalar(F, rho: float, t: float, side: str, tol: float, raw: bool = False):
    a, b = F.support.lo, F.support.hi
    if side == "up" and t < a:
        return 0.0
    if side == "low" and t >= b and not raw:
        return 1.0
    y0 = float(F(t))
    if side == "up":
        def area(zz):
            if zz <= y0:
                return 0.0
            q = left_inverse(F, zz)
            return zz * (q - t) - integrate(F, t, q)
        if area(1.0) <= rho:
            return 1.0
        lo, hi = y0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if area(mid) <= rho else (lo, mid)
        return 0.5 * (lo + hi)

    def area(zz):
        if zz >= y0 or zz >= 1.0:
            return 0.0
        q = generalized_inverse(F, zz)
        return integrate(F, q, t) - zz * (t - q)
    if area(0.0) <= rho:
        return 0.0
    lo, hi = 0.0, y0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if area(mid) <= rho else (mid, hi)
    return 0.5 * (lo + hi)


def envelope_oracle(F, rho: float, t, side: str = "up", tol: float = 1e-13):
    """Envelope value at ``t`` by bisection on the defining area equation.

    ``F`` may be any CDF; stepped inputs take a vectorized path.
    """
    if side not in ("up", "low"):
        raise DomainError(f"side must be 'up' or 'low', got {side!r}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(F, SteppedCdf):
        out = _oracle_stepped(F, float(rho), t_arr, side, tol)
    else:
        out = np.array([_oracle_general_scalar(F, float(rho), float(s), side, tol) for s in t_arr])
    return out if np.ndim(t) else float(out[0])


def envelope_numeric(F, rho: float, side: str = "up", tol: float = 1e-8, max_depth: int = 30) -> PiecewiseCdf:
    """Piecewise-linear envelope of an arbitrary CDF from the oracle.

    Intervals are bisected until the midpoint interpolation error is below
    ``tol``; meant for diagnostics on non-discrete inputs.
    """
    a, b = F.support.lo, F.support.hi
    S = F.support
    if side == "up":
        if integrate(F, a, b) >= (b - a) - rho:  # int (1-F) <= rho
            return trivial_upper(S)
        lo_t, hi_t = a, b
        for _ in range(200):  # t_up: sup{tau : int_tau^b (1 - F) >= rho}
            mid = 0.5 * (lo_t + hi_t)
            if (b - mid) - integrate(F, mid, b) >= rho:
                lo_t = mid
            else:
                hi_t = mid
        start, stop = a, lo_t
    else:
        if integrate(F, a, b) <= rho:
            return trivial_lower(S)
        lo_t, hi_t = a, b
        for _ in range(200):  # t_low: inf{tau : int_a^tau F >= rho}
            mid = 0.5 * (lo_t + hi_t)
            if integrate(F, a, mid) >= rho:
                hi_t = mid
            else:
                lo_t = mid
        start, stop = hi_t, b

    def value(s):
        return _oracle_general_scalar(F, rho, s, side, 1e-14, raw=True)

    nodes = {}

    def refine(p, q, fp, fq, depth):
        m = 0.5 * (p + q)
        fm = value(m)
        if depth >= max_depth or abs(fm - 0.5 * (fp + fq)) <= tol:
            nodes[m] = fm
            return
        refine(p, m, fp, fm, depth + 1)
        refine(m, q, fm, fq, depth + 1)
        nodes[m] = fm

    grid = np.linspace(start, stop, 33)
    vals = [value(s) for s in grid]
    for s, v in zip(grid, vals):
        nodes[s] = v
    for k in range(len(grid) - 1):
        refine(grid[k], grid[k + 1], vals[k], vals[k + 1], 0)
    ts = sorted(nodes)
    segs = []
    if side == "low" and start > a:
        segs.append(Segment("constant", a, start, (0.0,)))
    for p, q in zip(ts[:-1], ts[1:]):
        if q > p:
            lo_v, hi_v = max(0.0, min(1.0, nodes[p])), max(0.0, min(1.0, nodes[q]))
            segs.append(Segment("linear", p, q, (lo_v, max(lo_v, hi_v))))
    return PiecewiseCdf.from_finite(segs, S)


# ---------------------------------------------------------------------------
# bands


class AmbiguityBand:
    """All CDFs pointwise between ``lower`` and ``upper``.

    ``rho`` is the W1 radius the envelopes were built for (``None`` once the
    band has been transported by nonlinear dynamics).  ``uninformative`` marks
    bands where at least one side fell back to the trivial step.
    """

    def __init__(self, lower, upper, rho, support: SupportInterval, uninformative: bool = False,
                 discrepancy: float | None = None):
        self.lower = lower
        self.upper = upper
        self.rho = rho
        self.support = support
        self.uninformative = bool(uninformative)
        if discrepancy is not None:
            self.__dict__["discrepancy"] = float(discrepancy)

    def __repr__(self):
        return (f"AmbiguityBand(rho={self.rho!r}, support=[{self.support.lo}, {self.support.hi}], "
                f"uninformative={self.uninformative})")

    @cached_property
    def discrepancy(self) -> float:
        """W1 distance between the two envelopes."""
        return w1_distance(self.lower, self.upper)


def band_from_ball(ball: AmbiguityBall) -> AmbiguityBand:
    """Envelope band containing every CDF of the ball.

    A side whose radius reaches its admissible bound is replaced by the
    trivial step (which is then the exact envelope) and the band is flagged.
    """
    F, rho, S = ball.center, float(ball.radius), ball.support
    if S.width == 0 or rho == 0:
        pw = F.piecewise
        return AmbiguityBand(pw, pw, rho, S, discrepancy=0.0)
    flagged = False
    try:
        upper = upper_envelope_discrete(F, rho)
    except UninformativeBandError:
        upper, flagged = trivial_upper(S), True
    try:
        lower = lower_envelope_discrete(F, rho)
    except UninformativeBandError:
        lower, flagged = trivial_lower(S), True
    return AmbiguityBand(lower, upper, rho, S, uninformative=flagged)


def _probe_points(cdfs, refine: int) -> np.ndarray:
    pts = np.unique(np.concatenate([np.asarray(f.breakpoints(), dtype=float) for f in cdfs]))
    pts = pts[np.isfinite(pts)]
    if pts.size > 1:
        frac = np.arange(1, refine + 1) / (refine + 1)
        inner = (pts[:-1, None] + (pts[1:] - pts[:-1])[:, None] * frac[None, :]).ravel()
        pts = np.concatenate((pts, inner))
    return np.sort(pts)


def band_contains(band: AmbiguityBand, G, tol: float = 1e-12, refine: int = 16, extra=None) -> bool:
    """Whether ``lower <= G <= upper`` at all breakpoints and a refinement grid."""
    pts = _probe_points([band.lower, band.upper, G], refine)
    if extra is not None:
        pts = np.concatenate((pts, np.asarray(extra, dtype=float)))
    g = np.asarray(G(pts), dtype=float)
    lo = np.asarray(band.lower(pts), dtype=float)
    up = np.asarray(band.upper(pts), dtype=float)
    return bool(np.all(lo <= g + tol) and np.all(g <= up + tol))
