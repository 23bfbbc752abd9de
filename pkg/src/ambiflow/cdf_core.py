"""Exact one-dimensional CDFs.

Three concrete families live here:

* :class:`SteppedCdf` -- finitely many atoms (empirical distributions).
* :class:`PiecewiseCdf` -- a partition of ``[support.lo, inf)`` into segments
  whose values are constant, linear, quadratic or hyperbolic arcs
  ``z + A / (t_r - t)``.  Upper/lower envelopes of stepped CDFs are exactly of
  this form, and so is every CDF obtained from them by reflection or by a
  positive rescaling of the state axis.
* :class:`ContinuousCdf` -- an abstract CDF known through vectorized callables
  for the CDF and its antiderivative (used for closed-form "true" laws).

All CDFs are right-continuous.  Module-level functions (:func:`eval_cdf`,
:func:`generalized_inverse`, :func:`left_inverse`, :func:`reflect`,
:func:`w1_distance`, ...) dispatch over the families.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy import integrate as sp_integrate
from scipy.optimize import brentq

from .errors import DomainError, EmptySampleError

# Breakpoint equality is decided with this absolute tolerance times max(1, width).
BREAK_TOL = 1e-12

SEGMENT_KINDS = ("constant", "linear", "quadratic", "hyperbolic")


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"support must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise DomainError(f"support lower end {lo} exceeds upper end {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def tol(self) -> float:
        return BREAK_TOL * max(1.0, self.width)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def scaled(self, k: float) -> "SupportInterval":
        return SupportInterval(self.lo * k, self.hi * k)

    def hull(self, other: "SupportInterval") -> "SupportInterval":
        return SupportInterval(min(self.lo, other.lo), max(self.hi, other.hi))


# ---------------------------------------------------------------------------
# segments


@dataclass(frozen=True)
class Segment:
    """One piece ``[t_beg, t_end)`` of a :class:`PiecewiseCdf`.

    ``params`` by kind:

    * ``constant``: ``(value,)``
    * ``linear``: ``(y_beg, y_end)`` -- values at both ends
    * ``quadratic``: ``(c0, c1, c2)`` -- ``c0 + c1 u + c2 u**2`` with ``u = t - t_beg``
    * ``hyperbolic``: ``(z, A, t_r)`` -- ``z + A / (t_r - t)``; the pole lies
      outside the closed segment (to the right for upper envelopes, to the
      left after a reflection)
    """

    kind: str
    t_beg: float
    t_end: float
    params: tuple

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise DomainError(f"unknown segment kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "t_beg", float(self.t_beg))
        object.__setattr__(self, "t_end", float(self.t_end))
        if not self.t_end > self.t_beg:
            raise DomainError(f"empty segment [{self.t_beg}, {self.t_end})")
        if math.isinf(self.t_end) and self.kind != "constant":
            raise DomainError("only constant segments may be unbounded")
        if self.kind == "hyperbolic":
            t_r = self.params[2]
            if self.t_beg <= t_r <= self.t_end:
                raise DomainError(f"hyperbolic pole {t_r} inside [{self.t_beg}, {self.t_end}]")

    @property
    def length(self) -> float:
        return self.t_end - self.t_beg

    def local_form(self):
        """Return ``(c0, c1, c2, A, d)`` with value ``c0 + c1 u + c2 u^2 + A/(d - u)``."""
        p = self.params
        if self.kind == "constant":
            return p[0], 0.0, 0.0, 0.0, math.inf
        if self.kind == "linear":
            return p[0], (p[1] - p[0]) / self.length, 0.0, 0.0, math.inf
        if self.kind == "quadratic":
            return p[0], p[1], p[2], 0.0, math.inf
        z, amp, t_r = p
        return z, 0.0, 0.0, amp, t_r - self.t_beg

    def is_flat(self) -> bool:
        c0, c1, c2, amp, _ = self.local_form()
        return c1 == 0.0 and c2 == 0.0 and amp == 0.0

    def value(self, t):
        c0, c1, c2, amp, d = self.local_form()
        u = np.asarray(t, dtype=float) - self.t_beg
        out = c0 + u * (c1 + u * c2)
        if amp != 0.0:
            out = out + amp / (d - u)
        return out

    def start_value(self) -> float:
        return float(self.value(self.t_beg))

    def end_value(self) -> float:
        """Left limit at ``t_end`` (the value itself for unbounded pieces)."""
        if math.isinf(self.t_end):
            return self.params[0]
        if self.kind == "linear":
            return self.params[1]
        return float(self.value(self.t_end))

    def antiderivative(self, t):
        """``int_{t_beg}^t value``."""
        c0, c1, c2, amp, d = self.local_form()
        u = np.asarray(t, dtype=float) - self.t_beg
        out = u * (c0 + u * (c1 / 2.0 + u * c2 / 3.0))
        if amp != 0.0:
            out = out - amp * np.log1p(-u / d)
        return out

    def with_bounds(self, t_beg: float, t_end: float) -> "Segment":
        """Restriction (or snapping) of this piece to new bounds."""
        if self.kind == "constant" or self.kind == "hyperbolic":
            return Segment(self.kind, t_beg, t_end, self.params)
        if self.kind == "linear":
            return Segment("linear", t_beg, t_end,
                           (float(self.value(t_beg)), float(self.value(t_end))))
        c0, c1, c2, _, _ = self.local_form()
        delta = t_beg - self.t_beg
        return Segment("quadratic", t_beg, t_end,
                       (c0 + c1 * delta + c2 * delta * delta, c1 + 2.0 * c2 * delta, c2))

    def scaled(self, k: float) -> "Segment":
        """Piece of ``G(t) = F(t / k)`` for ``k > 0``."""
        beg, end = self.t_beg * k, self.t_end * k
        p = self.params
        if self.kind in ("constant", "linear"):
            return Segment(self.kind, beg, end, p)
        if self.kind == "quadratic":
            return Segment("quadratic", beg, end, (p[0], p[1] / k, p[2] / (k * k)))
        return Segment("hyperbolic", beg, end, (p[0], p[1] * k, p[2] * k))

    def reflected(self, a: float, b: float) -> "Segment":
        """Piece of ``s -> 1 - F(a + b - s)`` on ``[a+b-t_end, a+b-t_beg)``."""
        beg, end = a + b - self.t_end, a + b - self.t_beg
        p = self.params
        if self.kind == "constant":
            return Segment("constant", beg, end, (1.0 - p[0],))
        if self.kind == "linear":
            return Segment("linear", beg, end, (1.0 - p[1], 1.0 - p[0]))
        if self.kind == "quadratic":
            # t = t_end - v, u = L - v
            c0, c1, c2 = p
            length = self.length
            e0 = c0 + c1 * length + c2 * length * length
            e1 = -(c1 + 2.0 * c2 * length)
            return Segment("quadratic", beg, end, (1.0 - e0, -e1, -c2))
        z, amp, t_r = p
        return Segment("hyperbolic", beg, end, (1.0 - z, amp, a + b - t_r))


def _zero_segment(t_beg: float, t_end: float) -> Segment:
    return Segment("constant", t_beg, t_end, (0.0,))


# ---------------------------------------------------------------------------
# CDF families


class SteppedCdf:
    """Discrete CDF with atoms ``(location, mass)`` on a compact support."""

    def __init__(self, locations, masses, support: SupportInterval):
        locs = np.array(locations, dtype=float).ravel()
        mass = np.array(masses, dtype=float).ravel()
        if locs.size == 0:
            raise EmptySampleError("a stepped CDF needs at least one atom")
        if locs.shape != mass.shape:
            raise DomainError("locations and masses differ in length")
        if np.any(np.diff(locs) <= 0):
            raise DomainError("atom locations must be strictly increasing")
        if np.any(mass <= 0):
            raise DomainError("atom masses must be positive")
        if abs(mass.sum() - 1.0) > 1e-12:
            raise DomainError(f"atom masses sum to {mass.sum()!r}, not 1")
        if locs[0] < support.lo or locs[-1] > support.hi:
            raise DomainError("atoms lie outside the support")
        cum = np.cumsum(mass)
        cum[-1] = 1.0
        for arr in (locs, mass, cum):
            arr.flags.writeable = False
        self.locations = locs
        self.masses = mass
        self.cumulative = cum
        self.support = support

    def __repr__(self):
        return f"SteppedCdf(n_atoms={self.locations.size}, support=[{self.support.lo}, {self.support.hi}])"

    @property
    def atoms(self):
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.locations, t, side="right") - 1
        out = np.where(idx >= 0, self.cumulative[np.clip(idx, 0, None)], 0.0)
        return out if out.ndim else float(out)

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate(([self.support.lo, self.support.hi], self.locations)))

    @cached_property
    def piecewise(self) -> "PiecewiseCdf":
        segs = []
        lo = self.support.lo
        if self.locations[0] > lo:
            segs.append(_zero_segment(lo, self.locations[0]))
        for k in range(self.locations.size - 1):
            segs.append(Segment("constant", self.locations[k], self.locations[k + 1],
                                (self.cumulative[k],)))
        segs.append(Segment("constant", self.locations[-1], math.inf, (1.0,)))
        return PiecewiseCdf(segs, self.support)

    def mean(self) -> float:
        return float(np.dot(self.locations, self.masses))


class PiecewiseCdf:
    """CDF given by contiguous analytic segments covering ``[support.lo, inf)``.

    The value is 0 to the left of ``support.lo``.  The final segment is the
    constant 1 on ``[t_last, inf)``.
    """

    def __init__(self, segments: Sequence[Segment], support: SupportInterval):
        segs = [s for s in segments]
        if not segs:
            raise DomainError("no segments")
        tol = support.tol
        if abs(segs[0].t_beg - support.lo) > tol:
            raise DomainError(f"first segment starts at {segs[0].t_beg}, support at {support.lo}")
        fixed = [segs[0].with_bounds(support.lo, segs[0].t_end)] if segs[0].t_beg != support.lo else [segs[0]]
        for seg in segs[1:]:
            prev = fixed[-1]
            if abs(seg.t_beg - prev.t_end) > tol:
                raise DomainError(f"gap or overlap between segments at {prev.t_end} / {seg.t_beg}")
            if seg.t_beg != prev.t_end:
                seg = seg.with_bounds(prev.t_end, seg.t_end)
            fixed.append(seg)
        last = fixed[-1]
        if not (math.isinf(last.t_end) and last.kind == "constant" and last.params[0] == 1.0):
            raise DomainError("the last segment must be the constant 1 on [t, inf)")
        n = len(fixed)
        forms = np.array([s.local_form() for s in fixed], dtype=float).reshape(n, 5)
        c0, c1, c2, amp, d = forms.T.copy()
        lengths = np.array([s.length for s in fixed])
        with np.errstate(invalid="ignore", divide="ignore"):
            starts = c0 + np.where(amp != 0.0, amp / d, 0.0)
            fin = np.where(np.isfinite(lengths), lengths, 0.0)
            ends = c0 + fin * (c1 + fin * c2) + np.where(amp != 0.0, amp / (d - fin), 0.0)
        if starts.min() < -1e-9 or starts.max() > 1.0 + 1e-9:
            raise DomainError("segment values leave [0, 1]")
        # near a pole the value reacts to one ulp of t by |A| / gap^2 * ulp(t)
        begs = np.array([s.t_beg for s in fixed])
        ulp = 8.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(begs + fin))
        with np.errstate(invalid="ignore", divide="ignore"):
            sens_end = np.where(amp != 0.0, np.abs(amp) / (d - fin) ** 2 * ulp, 0.0)
            sens_beg = np.where(amp != 0.0, np.abs(amp) / d ** 2 * ulp, 0.0)
        slack = 1e-9 + sens_end[:-1] + sens_beg[1:]
        bad = np.flatnonzero((starts[:-1] > ends[:-1] + 1e-9 + sens_end[:-1]) | (ends[:-1] > starts[1:] + slack))
        if bad.size:
            raise DomainError(f"CDF decreases near t={fixed[bad[0]].t_end}")
        self.segments = tuple(fixed)
        self.support = support
        self._begs = np.array([s.t_beg for s in fixed])
        self._c0, self._c1, self._c2, self._amp, self._d = c0, c1, c2, amp, d

    @classmethod
    def from_finite(cls, segments: Sequence[Segment], support: SupportInterval) -> "PiecewiseCdf":
        """Build from pieces ending where the CDF reaches 1; appends the constant tail."""
        segs = list(segments)
        start = segs[-1].t_end if segs else support.lo
        segs.append(Segment("constant", start, math.inf, (1.0,)))
        return cls(segs, support)

    def __repr__(self):
        return f"PiecewiseCdf(n_segments={len(self.segments)}, support=[{self.support.lo}, {self.support.hi}])"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._begs, t, side="right") - 1
        j = np.clip(idx, 0, None)
        u = t - self._begs[j]
        amp = self._amp[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            pole = np.where(amp != 0.0, amp / (self._d[j] - u), 0.0)
        val = self._c0[j] + u * (self._c1[j] + u * self._c2[j]) + pole
        out = np.where(idx >= 0, np.clip(val, 0.0, 1.0), 0.0)
        return out if out.ndim else float(out)

    @property
    def saturation(self) -> float:
        """Start of the final constant-1 piece."""
        return self.segments[-1].t_beg

    def breakpoints(self) -> np.ndarray:
        pts = [s.t_beg for s in self.segments] + [self.support.hi]
        return np.unique(np.array(pts))

    @cached_property
    def _cum(self) -> np.ndarray:
        """``int_{lo}^{t_beg} F`` at every segment start."""
        pieces = [0.0]
        for seg in self.segments[:-1]:
            pieces.append(float(seg.antiderivative(seg.t_end)))
        return np.cumsum(pieces)

    def antiderivative(self, t):
        """Vectorized ``int_{-inf}^t F``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._begs, t, side="right") - 1
        j = np.clip(idx, 0, None)
        u = t - self._begs[j]
        amp, d = self._amp[j], self._d[j]
        poly = u * (self._c0[j] + u * (self._c1[j] / 2.0 + u * self._c2[j] / 3.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            log_part = np.where(amp != 0.0, -amp * np.log1p(-u / np.where(amp != 0.0, d, 1.0)), 0.0)
        out = np.where(idx >= 0, self._cum[j] + poly + log_part, 0.0)
        return out if out.ndim else float(out)

    def quantile(self, y, iterations: int = 200):
        """Vectorized ``inf{t : F(t) > y}`` by bisection on ``[lo, saturation]``."""
        y = np.asarray(y, dtype=float)
        lo = np.full(y.shape, self.support.lo)
        hi = np.full(y.shape, self.saturation)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            above = self(mid) > y
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
                break
        out = np.where(self(lo) > y, lo, hi)
        return out if out.ndim else float(out)

    def integral(self, lo: float, hi: float) -> float:
        """Exact ``int_lo^hi F``."""
        if hi < lo:
            return -self.integral(hi, lo)
        total = 0.0
        for seg in self.segments:
            a = max(lo, seg.t_beg)
            b = min(hi, seg.t_end)
            if b > a:
                total += float(seg.antiderivative(b) - seg.antiderivative(a))
            if seg.t_beg >= hi:
                break
        return total


class ContinuousCdf:
    """CDF described by vectorized callables.

    Subclasses implement :meth:`cdf` and :meth:`antiderivative`
    (``int_{-inf}^t F``).  :meth:`quantile` defaults to vectorized bisection.
    """

    support: SupportInterval

    def cdf(self, t):
        raise NotImplementedError

    def antiderivative(self, t):
        raise NotImplementedError

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.clip(self.cdf(t), 0.0, 1.0)
        out = np.where(t < self.support.lo, 0.0, np.where(t >= self.support.hi, 1.0, out))
        return out if out.ndim else float(out)

    def breakpoints(self) -> np.ndarray:
        return np.array([self.support.lo, self.support.hi])

    def integral(self, lo: float, hi: float) -> float:
        return float(self.antiderivative(hi) - self.antiderivative(lo))

    def quantile(self, y, iterations: int = 100):
        """``inf{t : F(t) > y}`` by bisection, vectorized over ``y``."""
        y = np.asarray(y, dtype=float)
        lo = np.full(y.shape, self.support.lo)
        hi = np.full(y.shape, self.support.hi)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            above = self(mid) > y
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
                break
        out = np.where(self(lo) > y, lo, hi)
        return out if out.ndim else float(out)


class ScaledCdf(ContinuousCdf):
    """``G(t) = base(t / k)``: the law of ``k X`` for ``X ~ base``, ``k > 0``."""

    def __init__(self, base: ContinuousCdf, k: float):
        if not k > 0:
            raise DomainError("scale factor must be positive")
        if isinstance(base, ScaledCdf):
            base, k = base.base, base.k * k
        self.base = base
        self.k = float(k)
        self.support = base.support.scaled(self.k)

    def cdf(self, t):
        return self.base.cdf(np.asarray(t, dtype=float) / self.k)

    def antiderivative(self, t):
        return self.k * self.base.antiderivative(np.asarray(t, dtype=float) / self.k)

    def quantile(self, y, iterations: int = 100):
        return self.k * np.asarray(self.base.quantile(y, iterations))


class ReflectedCdf(ContinuousCdf):
    """``s -> 1 - base(a + b - s)`` for a continuous base."""

    def __init__(self, base: ContinuousCdf, support: SupportInterval):
        self.base = base
        self.support = support
        self._shift = support.lo + support.hi

    def cdf(self, t):
        return 1.0 - self.base(self._shift - np.asarray(t, dtype=float))

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        lo = self.support.lo
        # int_lo^t (1 - F(a+b-s)) ds = (t - lo) - int_{a+b-t}^{b} F
        inner = self.base.antiderivative(self.support.hi) - self.base.antiderivative(self._shift - t)
        return np.where(t <= lo, 0.0, (t - lo) - inner)


AnyCdf = Union[SteppedCdf, PiecewiseCdf, ContinuousCdf]
ExactCdf = Union[SteppedCdf, PiecewiseCdf]


# ---------------------------------------------------------------------------
# operations


def from_samples(values, support: SupportInterval) -> SteppedCdf:
    """Empirical CDF; repeated values merge into one atom."""
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise EmptySampleError("no samples")
    if not np.all(np.isfinite(vals)):
        raise DomainError("samples must be finite")
    if vals.min() < support.lo or vals.max() > support.hi:
        bad = vals[(vals < support.lo) | (vals > support.hi)][0]
        raise DomainError(f"sample {bad} outside support [{support.lo}, {support.hi}]")
    locs, counts = np.unique(vals, return_counts=True)
    return SteppedCdf(locs, counts / vals.size, support)


def eval_cdf(F: AnyCdf, t):
    return F(t)


def _as_piecewise(F) -> PiecewiseCdf:
    return F.piecewise if isinstance(F, SteppedCdf) else F


def _solve_in_segment(seg: Segment, y: float) -> float:
    """Point in ``[t_beg, t_end]`` where a strictly increasing piece equals ``y``."""
    lo, hi = seg.t_beg, seg.t_end
    f_lo = seg.start_value()
    if f_lo >= y:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(seg.value(mid)) < y:
            lo = mid
        else:
            hi = mid
    return hi


def _piecewise_inverse(F: PiecewiseCdf, y: float, strict: bool) -> float:
    for seg in F.segments:
        v0 = seg.start_value()
        if (v0 > y) if strict else (v0 >= y):
            return seg.t_beg
        if not seg.is_flat() and seg.end_value() > y:
            return _solve_in_segment(seg, y)
    return F.saturation


def generalized_inverse(F: AnyCdf, y: float) -> float:
    """``inf{t : F(t) > y}`` for ``0 <= y < 1``."""
    y = float(y)
    if not 0.0 <= y < 1.0:
        raise DomainError(f"generalized inverse needs y in [0, 1), got {y}")
    if isinstance(F, SteppedCdf):
        i = int(np.searchsorted(F.cumulative, y, side="right"))
        return float(F.locations[i])
    if isinstance(F, PiecewiseCdf):
        return _piecewise_inverse(F, y, strict=True)
    return float(F.quantile(y))


def left_inverse(F: AnyCdf, y: float) -> float:
    """``inf{t : F(t) >= y}`` for ``0 < y <= 1``."""
    y = float(y)
    if not 0.0 < y <= 1.0:
        raise DomainError(f"left inverse needs y in (0, 1], got {y}")
    if isinstance(F, SteppedCdf):
        i = int(np.searchsorted(F.cumulative, y, side="left"))
        return float(F.locations[min(i, F.locations.size - 1)])
    if isinstance(F, PiecewiseCdf):
        return _piecewise_inverse(F, y, strict=False)
    # continuous: bisection on F >= y
    lo, hi = F.support.lo, F.support.hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if F(mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi if F(lo) < y else lo


def reflect(F: AnyCdf, support: SupportInterval | None = None):
    """Right-continuous version of ``t -> 1 - F(a + b - t)`` on ``[a, b]``.

    Stepped inputs stay stepped (atoms mirror), piecewise inputs stay piecewise.
    """
    support = F.support if support is None else support
    a, b = support.lo, support.hi
    if isinstance(F, SteppedCdf):
        locs = (a + b - F.locations)[::-1]
        return SteppedCdf(locs, F.masses[::-1], support)
    if isinstance(F, PiecewiseCdf):
        pieces = []
        for seg in F.segments:
            beg, end = max(seg.t_beg, a), min(seg.t_end, b)
            if end > beg:
                pieces.append(seg.with_bounds(beg, end).reflected(a, b))
        pieces.reverse()
        if not pieces or pieces[0].t_beg > a:
            first = pieces[0].t_beg if pieces else b
            pieces.insert(0, _zero_segment(a, first))
        return PiecewiseCdf.from_finite(pieces, support)
    return ReflectedCdf(F, support)


def scale(F: AnyCdf, k: float):
    """Law of ``k X`` for ``X ~ F`` and ``k > 0`` (state-axis rescaling)."""
    if not k > 0:
        raise DomainError("scale factor must be positive")
    if k == 1.0:
        return F
    support = F.support.scaled(k)
    if isinstance(F, SteppedCdf):
        return SteppedCdf(F.locations * k, F.masses, support)
    if isinstance(F, PiecewiseCdf):
        segs = [s.scaled(k) for s in F.segments]
        return PiecewiseCdf(segs, support)
    return ScaledCdf(F, k)


def integrate(F: AnyCdf, lo: float, hi: float) -> float:
    """Exact ``int_lo^hi F(s) ds`` (quadrature only for opaque CDFs)."""
    if isinstance(F, (SteppedCdf, PiecewiseCdf)):
        return _as_piecewise(F).integral(lo, hi)
    if isinstance(F, ContinuousCdf):
        return F.integral(lo, hi)
    return _quad(F, lo, hi)


def _quad(f, lo, hi, points=None, epsabs=1e-13, epsrel=1e-12):
    if hi <= lo:
        return 0.0
    pts = None
    if points is not None:
        pts = sorted({float(p) for p in points if lo < p < hi})
    val, _ = sp_integrate.quad(lambda s: float(f(s)), lo, hi, points=pts or None,
                               limit=max(200, 4 * len(pts or ()) + 50), epsabs=epsabs, epsrel=epsrel)
    return val


def is_exact(F) -> bool:
    return isinstance(F, (SteppedCdf, PiecewiseCdf))


# ---------------------------------------------------------------------------
# exact W1


def _segment_or_zero(F: PiecewiseCdf, t: float) -> Segment:
    idx = bisect.bisect_right(F._begs.tolist(), t) - 1
    if idx < 0:
        return _zero_segment(-1e308, F.support.lo)
    return F.segments[idx]


def _local_at(seg: Segment, p: float):
    """Coefficients of ``seg`` in the coordinate ``v = t - p``."""
    c0, c1, c2, amp, d = seg.local_form()
    delta = p - seg.t_beg
    e0 = c0 + c1 * delta + c2 * delta * delta
    e1 = c1 + 2.0 * c2 * delta
    return np.array([e0, e1, c2]), amp, (d - delta if amp != 0.0 else math.inf)


def _diff_roots(poly, poles, length):
    """Real roots in (0, length) of ``poly(v) + sum A/(d - v)``."""
    # numerator: poly * prod(d - v) + sum_k A_k prod_{j != k}(d_j - v)
    num = np.polynomial.Polynomial(poly)
    lins = [np.polynomial.Polynomial([d, -1.0]) for _, d in poles]
    total = num
    for lin in lins:
        total = total * lin
    for k, (amp, _) in enumerate(poles):
        term = np.polynomial.Polynomial([amp])
        for j, lin in enumerate(lins):
            if j != k:
                term = term * lin
        total = total + term
    coef = total.coef
    scale_ = np.max(np.abs(coef)) if coef.size else 0.0
    if scale_ == 0.0:
        return []
    coef = np.where(np.abs(coef) <= 1e-15 * scale_, 0.0, coef)
    nz = np.nonzero(coef)[0]
    if nz.size == 0 or nz[-1] == 0:
        return []
    coef = coef[: nz[-1] + 1]
    roots = np.roots(coef[::-1])
    out = []
    for r in roots:
        if abs(r.imag) <= 1e-9 * max(1.0, abs(r.real)) and 0.0 < r.real < length:
            out.append(float(r.real))
    return out


def _abs_diff_integral(sf: Segment, sg: Segment, p: float, q: float) -> float:
    """``int_p^q |f - g|`` for two analytic pieces valid on ``[p, q)``."""
    length = q - p
    pf, af, df = _local_at(sf, p)
    pg, ag, dg = _local_at(sg, p)
    dpoly = pf - pg
    poles = []
    if af != 0.0 and ag != 0.0 and df == dg:
        if af != ag:
            poles.append((af - ag, df))
    else:
        if af != 0.0:
            poles.append((af, df))
        if ag != 0.0:
            poles.append((-ag, dg))
    if not poles and not np.any(dpoly):
        return 0.0

    def diff(v):
        v = np.asarray(v, dtype=float)
        out = dpoly[0] + v * (dpoly[1] + v * dpoly[2])
        for amp, d in poles:
            out = out + amp / (d - v)
        return out

    def prim(v):
        out = v * (dpoly[0] + v * (dpoly[1] / 2.0 + v * dpoly[2] / 3.0))
        for amp, d in poles:
            out = out - amp * math.log1p(-v / d)
        return out

    cuts = set(_diff_roots(dpoly, poles, length))
    # sign-change scan catches roots lost to ill-conditioning
    grid = np.linspace(0.0, length, 17)
    vals = diff(grid)
    known = sorted(cuts)
    for k in range(16):
        if vals[k] * vals[k + 1] < 0 and not any(grid[k] < r < grid[k + 1] for r in known):
            cuts.add(brentq(diff, grid[k], grid[k + 1], xtol=1e-12 * max(1.0, length), rtol=1e-15))
    pts = [0.0] + sorted(cuts) + [length]
    total = 0.0
    prev = prim(0.0)
    for a, b in zip(pts[:-1], pts[1:]):
        cur = prim(b)
        total += abs(cur - prev)
        prev = cur
    return total


def _w1_exact(F: ExactCdf, G: ExactCdf) -> float:
    pf, pg = _as_piecewise(F), _as_piecewise(G)
    lo = min(pf.support.lo, pg.support.lo)
    hi = max(pf.saturation, pg.saturation, lo)
    pts = np.unique(np.concatenate((pf._begs, pg._begs, [lo, hi])))
    pts = pts[(pts >= lo) & (pts <= hi)]
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        if q <= p:
            continue
        total += _abs_diff_integral(_segment_or_zero(pf, p), _segment_or_zero(pg, p), p, q)
    return total


# stepped CDFs with more atoms than this use the quantile formula against piecewise CDFs
_MANY_ATOMS = 32


def _w1_stepped_continuous(F: SteppedCdf, G) -> float:
    """Exact up to the accuracy of ``G``'s antiderivative and quantile."""
    t = F.locations
    z = F.cumulative
    lo = min(G.support.lo, t[0])
    hi = max(G.support.hi, getattr(G, "saturation", G.support.hi), t[-1])
    prim = G.antiderivative
    total = float(prim(t[0]) - prim(lo))  # |0 - G| left of the first atom
    total += (hi - t[-1]) - float(prim(hi) - prim(t[-1]))  # |1 - G| after the last atom
    if t.size > 1:
        left, right, level = t[:-1], t[1:], z[:-1]
        cross = np.clip(np.asarray(G.quantile(level)), left, right)
        a_l, a_c, a_r = prim(left), prim(cross), prim(right)
        below = level * (cross - left) - (a_c - a_l)
        above = (a_r - a_c) - level * (right - cross)
        total += float(np.sum(below + above))
    return total


def w1_distance(F: AnyCdf, G: AnyCdf) -> float:
    """``int |F - G|`` over the real line.

    Exact, segment by segment with analytic crossing points, when both CDFs
    are stepped or piecewise.  A stepped CDF against a :class:`ContinuousCdf`
    uses the antiderivative and quantile of the continuous law.  Anything else
    falls back to adaptive quadrature over the union of breakpoints.
    """
    if isinstance(F, SteppedCdf) and isinstance(G, PiecewiseCdf) and F.locations.size > _MANY_ATOMS:
        return _w1_stepped_continuous(F, G)
    if isinstance(G, SteppedCdf) and isinstance(F, PiecewiseCdf) and G.locations.size > _MANY_ATOMS:
        return _w1_stepped_continuous(G, F)
    if is_exact(F) and is_exact(G):
        return _w1_exact(F, G)
    if isinstance(F, SteppedCdf) and isinstance(G, ContinuousCdf):
        return _w1_stepped_continuous(F, G)
    if isinstance(G, SteppedCdf) and isinstance(F, ContinuousCdf):
        return _w1_stepped_continuous(G, F)
    return w1_quadrature(F, G)


def w1_quadrature(F: AnyCdf, G: AnyCdf, epsabs: float = 1e-13) -> float:
    """Adaptive-quadrature W1 over the union of breakpoints."""
    pts = np.unique(np.concatenate((F.breakpoints(), G.breakpoints())))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += _quad(lambda s: abs(F(s) - G(s)), float(a), float(b), epsabs=epsabs, epsrel=max(1e-12, epsabs))
    return total
