"""Worked linear advection-reaction example and Monte Carlo validation.

The state obeys ``u_t + u_x = theta_r u`` on ``x >= 0`` with

* ``u0(x; a) = a1 + a2``
* ``ub(t; a) = a1 + a2 (1 + a3 sin(2 pi t))``

and ``a`` uniform on ``[0, 1]^3``.  True input laws are known in closed
form, which makes the whole pipeline checkable against exact answers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import (
    AmbiguityBall,
    InputParameterization,
    ParameterModel,
    RadiusSpec,
    ambiguity_radius,
    input_support,
)
from .cdf_core import (
    ContinuousCdf,
    PiecewiseCdf,
    Segment,
    SteppedCdf,
    SupportInterval,
    from_samples,
    scale,
    w1_distance,
)
from .envelope import AmbiguityBand, band_contains, band_from_ball
from .errors import DomainError
from .propagation import PhysicsModel, SpaceTimeGrid, linear_foot, parallel_map

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ExampleConfig:
    theta_r: float = -1.0
    N: int = 100
    beta: float = 0.05
    seed: int = 0
    K: float = 1.0
    p: float = 1.0
    corner: str = "boundary"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")

    def radius_spec(self) -> RadiusSpec:
        return RadiusSpec(p=self.p, n=3, beta=self.beta, mode="relative", K=self.K)


def _u0(x, a):
    a = np.asarray(a, dtype=float)
    return a[..., 0] + a[..., 1]


def _ub(x, t, a):
    a = np.asarray(a, dtype=float)
    return a[..., 0] + a[..., 1] * (1.0 + a[..., 2] * math.sin(TWO_PI * t))


def lipschitz_initial(x) -> float:
    return math.sqrt(2.0)


def lipschitz_boundary(x, t) -> float:
    s = math.sin(TWO_PI * t)
    return math.sqrt(2.0 + 2.0 * s * s + 2.0 * max(0.0, s))


def example_model(theta_r: float = -1.0):
    """``(PhysicsModel, InputParameterization, ParameterModel)`` of the example."""
    model = PhysicsModel.linear_model(theta_r)
    par = InputParameterization(u0=_u0, ub=_ub, L0=lipschitz_initial, Lb=lipschitz_boundary)
    pm = ParameterModel(np.array([[0.0, 1.0]] * 3), a_bar=np.full(3, 0.5), rho_a=0.5)
    return model, par, pm


def analytic_solution(x, t, a, theta_r: float = -1.0):
    """Exact state at ``(x, t)`` for parameter vector(s) ``a``."""
    if t == 0.0 or t < x:
        return _u0(x, a) * math.exp(theta_r * t)
    return _ub(0.0, t - x, a) * math.exp(theta_r * x)


def true_initial_support() -> SupportInterval:
    return SupportInterval(0.0, 2.0)


def true_boundary_support(t: float) -> SupportInterval:
    return SupportInterval(0.0, 2.0 + max(0.0, math.sin(TWO_PI * t)))


def true_input_cdf_u0() -> PiecewiseCdf:
    """Triangular law of ``a1 + a2`` on ``[0, 2]``."""
    segs = [
        Segment("quadratic", 0.0, 1.0, (0.0, 0.0, 0.5)),
        Segment("quadratic", 1.0, 2.0, (0.5, 1.0, -0.5)),
    ]
    return PiecewiseCdf.from_finite(segs, true_initial_support())


# Antiderivatives of the clipped identity and of its integral, piece by piece
# in w = U - m.  Each row gives (alpha, beta, gamma, delta) of the polynomial in
# m that the function equals for w > 1 and for 0 <= w <= 1 respectively.

def _g(v):
    v = np.asarray(v, dtype=float)
    return np.where(v < 0, 0.0, np.where(v <= 1.0, 0.5 * v * v, v - 0.5))


def _k(v):
    v = np.asarray(v, dtype=float)
    return np.where(v < 0, 0.0, np.where(v <= 1.0, v ** 3 / 6.0,
                                         0.5 * v * v - 0.5 * v + 1.0 / 6.0))


def _coeffs_g(U):
    z = np.zeros_like(U)
    high = (U - 0.5, -np.ones_like(U), z, z)
    mid = (0.5 * U * U, -U, np.full_like(U, 0.5), z)
    return high, mid


def _coeffs_k(U):
    z = np.zeros_like(U)
    high = (0.5 * U * U - 0.5 * U + 1.0 / 6.0, 0.5 - U, np.full_like(U, 0.5), z)
    mid = (U ** 3 / 6.0, -0.5 * U * U, 0.5 * U, np.full_like(U, -1.0 / 6.0))
    return high, mid


def _piece_integral(top, coeffs, p, q):
    """``int_p^q (top - poly(m)) / m dm`` with ``poly = alpha + beta m + gamma m^2 + delta m^3``."""
    alpha, beta, gamma, delta = coeffs
    c = top - alpha
    live = q > p
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(live & (p > 0) & (c != 0.0), c * np.log(np.where(live & (p > 0), q / p, 1.0)), 0.0)
    poly = beta * (q - p) + gamma * (q * q - p * p) / 2.0 + delta * (q ** 3 - p ** 3) / 3.0
    return np.where(live, logs - poly, 0.0)


class ProductUniformCdf(ContinuousCdf):
    """Law of ``a1 + a2 (1 + a3 s)`` for independent uniforms on ``[0, 1]``.

    With ``m = 1 + a3 s`` uniform between 1 and ``1 + s`` the CDF is
    ``E_m[(G(U) - G(U - m)) / m]`` where ``G`` integrates ``clip(., 0, 1)``;
    the average over ``m`` is done in closed form.
    """

    def __init__(self, s: float):
        if not -1.0 <= s <= 1.0:
            raise DomainError("s must lie in [-1, 1]")
        self.s = float(s)
        self.m_lo, self.m_hi = min(1.0, 1.0 + s), max(1.0, 1.0 + s)
        self.support = SupportInterval(0.0, 1.0 + self.m_hi)

    def _average(self, U, outer, coeff_fn):
        U = np.asarray(U, dtype=float)
        top = outer(U)
        if abs(self.s) < 1e-6:
            m = 1.0 + 0.5 * self.s
            return (top - outer(U - m)) / m
        lo, hi = self.m_lo, self.m_hi
        b1 = np.clip(U - 1.0, lo, hi)
        b2 = np.clip(U, lo, hi)
        high, mid = coeff_fn(U)
        total = _piece_integral(top, high, np.full_like(U, lo), b1)
        total = total + _piece_integral(top, mid, b1, b2)
        # for m > U the integrand is top / m
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where((hi > b2) & (b2 > 0) & (top != 0.0), top * np.log(hi / np.where(b2 > 0, b2, 1.0)), 0.0)
        return (total + tail) / (hi - lo)

    def cdf(self, U):
        return self._average(U, _g, _coeffs_g)

    def antiderivative(self, U):
        return self._average(U, _k, _coeffs_k)


def true_input_cdf_ub(t: float) -> ProductUniformCdf:
    return ProductUniformCdf(math.sin(TWO_PI * t))


def true_slice(x: float, t: float, theta_r: float = -1.0, corner: str = "boundary"):
    """Exact law of ``u(x, t)`` obtained by rescaling the true input law."""
    origin, pos, tau = linear_foot(theta_r, x, t, corner)
    src = true_input_cdf_u0() if origin == "initial" else true_input_cdf_ub(pos)
    return scale(src, math.exp(theta_r * tau))


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def sample_parameters(pm: ParameterModel, N: int, seed) -> np.ndarray:
    return pm.sample(make_rng(seed), N)


def monte_carlo_cdf(M: int, x: float, t: float, theta_r: float = -1.0, seed=0) -> SteppedCdf:
    """Empirical law of the exact solution over ``M`` parameter draws."""
    if int(M) != M or M < 1:
        raise DomainError("M must be a positive integer")
    _, _, pm = example_model(theta_r)
    a = sample_parameters(pm, int(M), seed)
    vals = analytic_solution(x, t, a, theta_r)
    origin, pos, tau = linear_foot(theta_r, x, t)
    base = true_initial_support() if origin == "initial" else true_boundary_support(pos)
    return from_samples(vals, base.scaled(math.exp(theta_r * tau)))


# ---------------------------------------------------------------------------
# containment validation

SEEDINGS = ("exact", "zero", "max", "uninformative")


@dataclass
class _TrialInputs:
    """Per-trial input balls/bands with the true input distances behind them."""

    cfg: ExampleConfig
    par: InputParameterization
    pm: ParameterModel
    a: np.ndarray
    eps: float
    seeding: str
    cache: dict = field(default_factory=dict)

    def _radius(self, d: float, lip: float, support: SupportInterval) -> float:
        if self.seeding == "exact":
            return d
        if self.seeding == "zero":
            return 0.0
        if self.seeding == "uninformative":
            return support.width
        return max(d, lip * self.eps)

    def get(self, origin: str, pos: float):
        key = (origin, pos)
        if key not in self.cache:
            if origin == "initial":
                where, true = ("initial", pos), true_input_cdf_u0()
                lip = self.par.L0(pos)
                vals = _u0(pos, self.a)
            else:
                where, true = ("boundary", 0.0, pos), true_input_cdf_ub(pos)
                lip = self.par.Lb(0.0, pos)
                vals = _ub(0.0, pos, self.a)
            support = input_support(self.par, self.pm, where)
            center = from_samples(vals, support)
            d = w1_distance(center, true)
            ball = AmbiguityBall(center, self._radius(d, lip, support), support)
            self.cache[key] = (ball, band_from_ball(ball), true, d)
        return self.cache[key]


def default_grid() -> SpaceTimeGrid:
    return SpaceTimeGrid(np.linspace(0.0, 2.0, 5), np.linspace(0.0, 2.0, 5))


def _run_trial(cfg: ExampleConfig, grid: SpaceTimeGrid, seeding: str, seed_seq, rel_tol: float):
    model, par, pm = example_model(cfg.theta_r)
    a = sample_parameters(pm, cfg.N, seed_seq)
    eps = ambiguity_radius(cfg.radius_spec(), cfg.N, pm.rho_a)
    inputs = _TrialInputs(cfg, par, pm, a, eps, seeding)
    records = []
    for it, ix, x, t in grid.nodes():
        origin, pos, tau = linear_foot(cfg.theta_r, x, t, cfg.corner)
        ball, band, true, d = inputs.get(origin, pos)
        k = math.exp(cfg.theta_r * tau)
        true_k = scale(true, k)
        center_k = scale(ball.center, k)
        radius_k = ball.radius * k
        dist = w1_distance(true_k, center_k)
        in_ball = dist <= radius_k * (1.0 + rel_tol) + 1e-12
        band_k = (scale(band.lower, k), scale(band.upper, k))
        in_band = band_contains(AmbiguityBand(band_k[0], band_k[1], band.rho, band.support.scaled(k)),
                                true_k, tol=1e-10)
        input_ok = d <= ball.radius * (1.0 + rel_tol) + 1e-12
        records.append(dict(x=x, t=t, origin=origin, in_ball=bool(in_ball), in_band=bool(in_band),
                            input_contained=bool(input_ok), distance=float(dist), radius=float(radius_k)))
    return records


def validate_containment(cfg: ExampleConfig, trials: int, grid: SpaceTimeGrid | None = None,
                         seeding: str = "exact", rel_tol: float = 1e-9, workers: int | None = None) -> dict:
    """Check that propagated true CDFs stay inside propagated balls and bands.

    Each trial draws ``cfg.N`` parameter samples from its own child seed, so
    results do not depend on how trials are scheduled.  A node counts as a
    mechanism violation when the input it is fed from was contained but the
    propagated true CDF is not.
    """
    if int(trials) != trials or trials < 1:
        raise DomainError("invalid trials: need a positive integer")
    if seeding not in SEEDINGS:
        raise DomainError(f"seeding must be one of {SEEDINGS}")
    grid = default_grid() if grid is None else grid
    children = np.random.SeedSequence(cfg.seed).spawn(int(trials))
    per_trial = parallel_map(lambda ss: _run_trial(cfg, grid, seeding, ss, rel_tol), children, workers)
    violations = []
    mech = 0
    ok_nodes = 0
    total = 0
    for k, recs in enumerate(per_trial):
        for rec in recs:
            total += 1
            if rec["in_ball"] and rec["in_band"]:
                ok_nodes += 1
                continue
            rec = dict(rec, trial=k)
            violations.append(rec)
            if rec["input_contained"]:
                mech += 1
    return {
        "trials": int(trials),
        "nodes": len(grid.nodes()),
        "seeding": seeding,
        "containment_fraction": ok_nodes / total,
        "mechanism_violations": mech,
        "violations": violations,
    }
