"""Characteristic solvers for the CDF transport and W1 discrepancy equations.

The spatial domain is the half line ``x >= 0`` with an inflow boundary at
``x = 0``.  Characteristics satisfy ``dx/ds = qdot(U)`` and ``dU/ds = r(U)``;
the one-point CDF is constant along them.  Nothing here discretizes the PDE:
each grid node is traced back to its foot and the input CDF is evaluated
there, exactly for linear models and through an adaptive ODE solve otherwise.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, solve_ivp

from .ambiguity import AmbiguityBall
from .cdf_core import ContinuousCdf, SupportInterval, _quad, scale, w1_distance, w1_quadrature
from .envelope import AmbiguityBand
from .errors import DomainError, LinearityRequiredError, NotUpstreamError, TraceError

CORNER_CHOICES = ("boundary", "initial")


@dataclass(frozen=True)
class PhysicsModel:
    """Coefficients of the transport equation.

    Build instances with :meth:`linear_model` (``q(u) = u``, ``r(u) = theta_r u``)
    or :meth:`nonlinear_model`.
    """

    qdot: Callable
    r: Callable
    rdot: Callable | None = None
    linear: bool = False
    theta_r: float | None = None

    @classmethod
    def linear_model(cls, theta_r: float, offset: float = 0.0) -> "PhysicsModel":
        if offset != 0.0:
            # r(u) = theta_r u + offset is traced numerically but never treated as linear
            th, c0 = float(theta_r), float(offset)
            return cls(qdot=lambda U: np.ones_like(np.asarray(U, dtype=float)),
                       r=lambda U: th * np.asarray(U, dtype=float) + c0,
                       rdot=lambda U: th + 0.0 * np.asarray(U, dtype=float),
                       linear=False)
        th = float(theta_r)
        return cls(qdot=lambda U: np.ones_like(np.asarray(U, dtype=float)),
                   r=lambda U: th * np.asarray(U, dtype=float),
                   rdot=lambda U: th + 0.0 * np.asarray(U, dtype=float),
                   linear=True, theta_r=th)

    @classmethod
    def nonlinear_model(cls, qdot: Callable, r: Callable, rdot: Callable | None = None) -> "PhysicsModel":
        return cls(qdot=qdot, r=r, rdot=rdot, linear=False)


@dataclass(frozen=True)
class Foot:
    """Where a characteristic through ``(x, U, t)`` starts.

    ``origin`` is ``"initial"`` (``position`` = ``x0``) or ``"boundary"``
    (``position`` = entry time ``tb``); ``state`` is the U coordinate there.
    """

    origin: str
    position: float
    state: float
    transit_time: float

    @property
    def is_initial(self) -> bool:
        return self.origin == "initial"


@dataclass(frozen=True)
class SpaceTimeGrid:
    xs: np.ndarray
    ts: np.ndarray
    Us: np.ndarray | None = None

    def __post_init__(self):
        for name in ("xs", "ts", "Us"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.array(val, dtype=float).ravel()
            if arr.size == 0:
                raise DomainError(f"grid axis {name} is empty")
            if arr.size > 1 and np.any(np.diff(arr) <= 0):
                raise DomainError(f"grid axis {name} must be strictly increasing")
            object.__setattr__(self, name, arr)
        if self.xs[0] < 0 or self.ts[0] < 0:
            raise DomainError("x and t must be non-negative")

    @property
    def shape(self):
        return (self.ts.size, self.xs.size)

    def nodes(self):
        """``(it, ix, x, t)`` in row-major order (t outer, x inner)."""
        return [(it, ix, float(x), float(t))
                for it, t in enumerate(self.ts) for ix, x in enumerate(self.xs)]


def _check_corner(corner: str):
    if corner not in CORNER_CHOICES:
        raise DomainError(f"corner precedence must be one of {CORNER_CHOICES}, got {corner!r}")


def linear_foot(theta_r: float, x: float, t: float, corner: str = "boundary"):
    """``(origin, position, transit)`` for unit speed; the state factor is ``exp(-theta_r * transit)``."""
    if t == 0.0:
        return "initial", x, 0.0
    if t < x or (t == x and corner == "initial"):
        return "initial", x - t, t
    return "boundary", t - x, x


def trace_characteristic(model: PhysicsModel, x: float, U: float, t: float,
                         corner: str = "boundary", rtol: float = 1e-12, atol: float = 1e-13) -> Foot:
    """Follow the characteristic through ``(x, U)`` at time ``t`` back to its foot."""
    _check_corner(corner)
    x, U, t = float(x), float(U), float(t)
    if x < 0 or t < 0:
        raise DomainError("x and t must be non-negative")
    if t == 0.0:
        return Foot("initial", x, U, 0.0)
    if model.linear:
        origin, pos, tau = linear_foot(model.theta_r, x, t, corner)
        return Foot(origin, pos, U * math.exp(-model.theta_r * tau), tau)
    return _trace_numeric(model, x, U, t, corner, rtol, atol)


def _trace_numeric(model, x, U, t, corner, rtol, atol) -> Foot:
    def speed(u):
        return float(np.asarray(model.qdot(u)))

    if not speed(U) > 0:
        raise NotUpstreamError(f"qdot({U}) = {speed(U)} is not positive")
    if x == 0.0:
        return Foot("boundary", t, U, 0.0)

    # reversed time sigma = t - s
    def rhs(_sigma, y):
        return [-speed(y[1]), -float(np.asarray(model.r(y[1])))]

    def hit_boundary(_sigma, y):
        return y[0]
    hit_boundary.terminal = True
    hit_boundary.direction = -1

    def stalls(_sigma, y):
        return speed(y[1])
    stalls.terminal = True
    stalls.direction = -1

    sol = solve_ivp(rhs, (0.0, t), [x, U], method="DOP853", rtol=rtol, atol=atol,
                    events=(hit_boundary, stalls))
    if sol.status == -1:
        raise TraceError(f"characteristic integration failed: {sol.message}")
    if sol.t_events[1].size:
        raise NotUpstreamError("characteristic reached a state with qdot <= 0")
    if sol.t_events[0].size:
        sigma = float(sol.t_events[0][0])
        u_b = float(sol.y_events[0][0][1])
        if abs(sigma - t) <= 1e-12 * max(1.0, t) and corner == "initial":
            return Foot("initial", 0.0, u_b, t)
        return Foot("boundary", max(t - sigma, 0.0), u_b, sigma)
    x0, u0 = float(sol.y[0, -1]), float(sol.y[1, -1])
    if abs(x0) <= 1e-12 * max(1.0, x) and corner == "boundary":
        return Foot("boundary", 0.0, u0, t)
    return Foot("initial", max(x0, 0.0), u0, t)


# ---------------------------------------------------------------------------
# parallel helpers


def worker_count() -> int:
    cap = os.environ.get("AMBIFLOW_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


def parallel_map(fn, items, workers: int | None = None):
    """Ordered map; results never depend on the number of workers."""
    items = list(items)
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# fields


class TracedCdf(ContinuousCdf):
    """Slice ``U -> F(U, x, t)`` of a nonlinear solution, evaluated by tracing.

    ``support`` is only a window for quadrature and plotting: the grid's U
    range unless one is supplied.
    """

    def __init__(self, model, x, t, F0, Fb, support: SupportInterval, corner="boundary"):
        self.model, self.x, self.t = model, float(x), float(t)
        self.F0, self.Fb = F0, Fb
        self.support = support
        self.corner = corner

    def cdf(self, U):
        U = np.asarray(U, dtype=float)
        flat = [self._one(u) for u in U.ravel()]
        return np.array(flat).reshape(U.shape)

    def _one(self, u):
        foot = trace_characteristic(self.model, self.x, u, self.t, self.corner)
        src = self.F0(foot.position) if foot.is_initial else self.Fb(foot.position)
        return float(src(foot.state))

    def __call__(self, U):
        U = np.asarray(U, dtype=float)
        out = np.clip(self.cdf(U), 0.0, 1.0)
        return out if out.ndim else float(out)

    def antiderivative(self, U):
        U = np.atleast_1d(np.asarray(U, dtype=float))
        lo = self.support.lo
        vals = [(_quad(self, lo, u) if u > lo else 0.0) for u in U]
        return np.array(vals) if len(vals) > 1 else vals[0]


def _slice(model, x, t, F0, Fb, corner, window):
    if model.linear:
        origin, pos, tau = linear_foot(model.theta_r, x, t, corner)
        src = F0(pos) if origin == "initial" else Fb(pos)
        return scale(src, math.exp(model.theta_r * tau))
    return TracedCdf(model, x, t, F0, Fb, window, corner)


class CdfField:
    """Transported CDF on a grid: ``values[it, ix, iU]`` and per-node slices."""

    def __init__(self, grid: SpaceTimeGrid, slices, values: np.ndarray | None):
        self.grid = grid
        self.slices = slices  # nested list [it][ix]
        self.values = values

    def slice(self, x: float, t: float):
        ix = int(np.flatnonzero(self.grid.xs == x)[0])
        it = int(np.flatnonzero(self.grid.ts == t)[0])
        return self.slices[it][ix]


class ScalarField:
    """Scalar ``w(x, t)`` on a grid: ``values[it, ix]``."""

    def __init__(self, grid: SpaceTimeGrid, values: np.ndarray, name: str = "w"):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.name = name

    def at(self, x: float, t: float) -> float:
        ix = int(np.flatnonzero(self.grid.xs == x)[0])
        it = int(np.flatnonzero(self.grid.ts == t)[0])
        return float(self.values[it, ix])


def _u_window(grid: SpaceTimeGrid) -> SupportInterval:
    if grid.Us is None:
        raise DomainError("a U axis is required for nonlinear slices")
    return SupportInterval(float(grid.Us[0]), float(grid.Us[-1]))


def solve_cdf_pde(model: PhysicsModel, F0, Fb, grid: SpaceTimeGrid, corner: str = "boundary",
                  workers: int | None = None) -> CdfField:
    """Transport input CDFs ``F0(x)`` and ``Fb(t)`` to every grid node."""
    _check_corner(corner)
    window = None if model.linear else _u_window(grid)
    nodes = grid.nodes()

    def work(node):
        _, _, x, t = node
        sl = _slice(model, x, t, F0, Fb, corner, window)
        vals = None if grid.Us is None else np.asarray(sl(grid.Us), dtype=float)
        return sl, vals

    results = parallel_map(work, nodes, workers)
    nt, nx = grid.shape
    slices = [[None] * nx for _ in range(nt)]
    values = None if grid.Us is None else np.empty((nt, nx, grid.Us.size))
    for (it, ix, _, _), (sl, vals) in zip(nodes, results):
        slices[it][ix] = sl
        if values is not None:
            values[it, ix] = vals
    return CdfField(grid, slices, values)


def _require_linear(model: PhysicsModel):
    if not model.linear:
        raise LinearityRequiredError("linearity required: the W1 equation holds for linear dynamics only")


def solve_w1_pde(model: PhysicsModel, w0, wb, grid: SpaceTimeGrid, corner: str = "boundary") -> ScalarField:
    """Closed-form solution of ``dw/dt = rdot * w`` along unit-speed characteristics."""
    _require_linear(model)
    _check_corner(corner)
    th = model.theta_r
    nt, nx = grid.shape
    out = np.empty((nt, nx))
    for it, ix, x, t in grid.nodes():
        origin, pos, tau = linear_foot(th, x, t, corner)
        base = w0(pos) if origin == "initial" else wb(pos)
        out[it, ix] = float(base) * math.exp(th * tau)
    return ScalarField(grid, out, "w")


def propagate_pointwise_bound(model: PhysicsModel, e0, eb, grid: SpaceTimeGrid,
                              corner: str = "boundary") -> np.ndarray:
    """Carry a bound on ``|F1 - F2|`` along characteristics; returns ``[it, ix, iU]``."""
    if grid.Us is None:
        raise DomainError("a U axis is required")
    nt, nx = grid.shape
    out = np.empty((nt, nx, grid.Us.size))
    for it, ix, x, t in grid.nodes():
        for iu, u in enumerate(grid.Us):
            foot = trace_characteristic(model, x, u, t, corner)
            fn = e0 if foot.is_initial else eb
            out[it, ix, iu] = fn(foot.state, foot.position)
    return out


def propagate_band(model: PhysicsModel, band0, bandb, grid: SpaceTimeGrid, corner: str = "boundary",
                   workers: int | None = None):
    """Transport both envelopes of the input bands; returns bands as ``[it][ix]``.

    For linear models the band at a node is the input band rescaled by
    ``exp(theta_r * transit)``, and so are its radius and its discrepancy.
    """
    _check_corner(corner)
    window = None if model.linear else _u_window(grid)
    nodes = grid.nodes()

    def work(node):
        _, _, x, t = node
        if model.linear:
            origin, pos, tau = linear_foot(model.theta_r, x, t, corner)
            src = band0(pos) if origin == "initial" else bandb(pos)
            k = math.exp(model.theta_r * tau)
            rho = None if src.rho is None else src.rho * k
            return AmbiguityBand(scale(src.lower, k), scale(src.upper, k), rho,
                                 src.support.scaled(k), src.uninformative,
                                 discrepancy=src.discrepancy * k)
        lower = TracedCdf(model, x, t, lambda p: band0(p).lower, lambda p: bandb(p).lower, window, corner)
        upper = TracedCdf(model, x, t, lambda p: band0(p).upper, lambda p: bandb(p).upper, window, corner)
        return AmbiguityBand(lower, upper, None, window)

    results = parallel_map(work, nodes, workers)
    nt, nx = grid.shape
    out = [[None] * nx for _ in range(nt)]
    for (it, ix, _, _), band in zip(nodes, results):
        out[it][ix] = band
    return out


def band_discrepancy_field(bands, grid: SpaceTimeGrid) -> ScalarField:
    """``w_env(x, t)``: W1 distance between the propagated envelopes."""
    nt, nx = grid.shape
    vals = np.empty((nt, nx))
    for it, ix, _, _ in grid.nodes():
        band = bands[it][ix]
        if isinstance(band.lower, TracedCdf):
            with warnings.catch_warnings():
                # traced slices are only piecewise smooth; quad reports harmless round-off
                warnings.simplefilter("ignore", IntegrationWarning)
                vals[it, ix] = w1_quadrature(band.lower, band.upper, epsabs=1e-8)
        else:
            vals[it, ix] = band.discrepancy
    return ScalarField(grid, vals, "w_env")


def propagate_ball(model: PhysicsModel, ball0, ballb, grid: SpaceTimeGrid, corner: str = "boundary"):
    """Centers by CDF transport, radii by the W1 equation; returns ``([it][ix] balls, radius field)``."""
    _require_linear(model)
    radius = solve_w1_pde(model, lambda x: ball0(x).radius, lambda t: ballb(t).radius, grid, corner)
    nt, nx = grid.shape
    balls = [[None] * nx for _ in range(nt)]
    for it, ix, x, t in grid.nodes():
        origin, pos, tau = linear_foot(model.theta_r, x, t, corner)
        src = ball0(pos) if origin == "initial" else ballb(pos)
        k = math.exp(model.theta_r * tau)
        balls[it][ix] = AmbiguityBall(scale(src.center, k), float(radius.values[it, ix]),
                                      src.support.scaled(k))
    return balls, radius


def slice_distance_field(field_a: CdfField, field_b: CdfField) -> ScalarField:
    """Exact W1 distance between two transported fields, node by node."""
    grid = field_a.grid
    nt, nx = grid.shape
    vals = np.empty((nt, nx))
    for it, ix, _, _ in grid.nodes():
        vals[it, ix] = w1_distance(field_a.slices[it][ix], field_b.slices[it][ix])
    return ScalarField(grid, vals, "w")
