"""Finite-sample ambiguity radii and pointwise input ambiguity balls."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cdf_core import SteppedCdf, SupportInterval, from_samples
from .errors import DomainError, InvalidConstantsError, UnsupportedBranchError


@dataclass(frozen=True)
class RadiusSpec:
    """Parameters of the concentration bound for ``W_p`` in dimension ``n``.

    ``mode="absolute"`` uses the constants ``C`` and ``c`` as given.
    ``mode="relative"`` replaces the whole constant factor
    ``(ln(C/beta)/c)^(1/n or 1/(2p))`` by ``K`` (default 1), which keeps every
    ratio between sample sizes exact without inventing ``C`` and ``c``.
    """

    p: float = 1.0
    n: int = 1
    beta: float = 0.05
    C: float | None = None
    c: float | None = None
    mode: str = "relative"
    K: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise DomainError(f"Wasserstein exponent p must be >= 1, got {self.p}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"dimension n must be a positive integer, got {self.n}")
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if self.mode not in ("absolute", "relative"):
            raise DomainError(f"unknown radius mode {self.mode!r}")
        if self.mode == "absolute":
            if self.C is None or self.c is None:
                raise DomainError("absolute mode needs both C and c")
            if not (self.C > 0 and self.c > 0):
                raise DomainError("C and c must be positive")
        elif not self.K > 0:
            raise DomainError("relative constant K must be positive")

    @property
    def branch(self) -> str:
        half = self.n / 2.0
        if self.p > half:
            return "high"
        if self.p == half:
            return "critical"
        return "low"

    def log_term(self) -> float:
        """``ln(C / beta) / c`` (absolute mode) or its relative equivalent."""
        if self.mode == "absolute":
            num = math.log(self.C / self.beta)
            if num <= 0:
                raise InvalidConstantsError(
                    f"invalid concentration constants: ln(C/beta) = {num:.6g} <= 0")
            return num / self.c
        exponent = 2.0 * self.p if self.branch != "low" else float(self.n)
        return self.K ** exponent


def h_function(x):
    """``h(x) = x^2 / ln(2 + 1/x)^2`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return x * x / np.log(2.0 + 1.0 / x) ** 2


def h_inverse(v: float) -> float:
    """Solve ``h(x) = v`` for ``x > 0`` by bracketing and bisection."""
    v = float(v)
    if not v > 0:
        raise DomainError(f"h^-1 is defined for v > 0, got {v}")
    lo, hi = 1.0, 1.0
    while h_function(lo) > v:
        lo *= 0.5
    while h_function(hi) < v:
        hi *= 2.0
    # h increases on (0, inf); a violation here means the bracket is wrong
    if not h_function(lo) <= v <= h_function(hi):
        raise ArithmeticError("failed to bracket h^-1")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h_function(mid) < v:
            lo = mid
        else:
            hi = mid
    return lo if abs(h_function(lo) - v) <= abs(h_function(hi) - v) else hi


def ambiguity_radius(spec: RadiusSpec, N: int, rho: float) -> float:
    """Radius ``eps_N(beta, rho)`` of the Wasserstein ball around ``N`` samples."""
    if int(N) != N or N < 1:
        raise DomainError(f"sample size must be a positive integer, got {N}")
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    log_term = spec.log_term()
    p, n = float(spec.p), float(spec.n)
    if spec.branch == "high":
        return log_term ** (1.0 / (2.0 * p)) * rho / N ** (1.0 / (2.0 * p))
    if spec.branch == "critical":
        return h_inverse(log_term / N) ** (1.0 / p) * rho
    return log_term ** (1.0 / n) * rho / N ** (1.0 / n)


def radius_ratio(spec: RadiusSpec, N1: int, N2: int) -> float:
    """``eps_N1 / eps_N2`` at a fixed confidence level (constant free off the critical branch)."""
    if N1 < 1 or N2 < 1:
        raise DomainError("sample sizes must be positive")
    if spec.branch == "critical":
        raise UnsupportedBranchError("the ratio depends on unknown constants when p = n/2")
    exponent = 1.0 / (2.0 * spec.p) if spec.branch == "high" else 1.0 / spec.n
    return (N2 / N1) ** exponent


@dataclass(frozen=True)
class ParameterModel:
    """Box support of the parameter law, its center and half-diameter (inf-norm)."""

    box: np.ndarray
    a_bar: np.ndarray = None
    rho_a: float = None

    def __post_init__(self):
        box = np.array(self.box, dtype=float).reshape(-1, 2)
        if np.any(box[:, 1] < box[:, 0]):
            raise DomainError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "box", box)
        if self.a_bar is None:
            object.__setattr__(self, "a_bar", box.mean(axis=1))
        else:
            object.__setattr__(self, "a_bar", np.array(self.a_bar, dtype=float))
        if self.rho_a is None:
            object.__setattr__(self, "rho_a", float(np.max(box[:, 1] - box[:, 0]) / 2.0))
        reach = np.max(np.maximum(np.abs(box[:, 0] - self.a_bar), np.abs(box[:, 1] - self.a_bar)))
        if reach > self.rho_a * (1 + 1e-12):
            raise DomainError("a_bar is farther than rho_a (inf-norm) from some box corner")

    @property
    def n(self) -> int:
        return self.box.shape[0]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo, hi = self.box[:, 0], self.box[:, 1]
        return lo + (hi - lo) * rng.random((size, self.n))


@dataclass(frozen=True)
class InputParameterization:
    """Parameterized initial/boundary data and their Lipschitz moduli in ``a``."""

    u0: Callable  # (x, a) -> value
    ub: Callable  # (x, t, a) -> value
    L0: Callable  # x -> Lipschitz constant of a -> u0(x; a)
    Lb: Callable  # (x, t) -> Lipschitz constant of a -> ub(x, t; a)
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AmbiguityBall:
    center: SteppedCdf
    radius: float
    support: SupportInterval

    def __post_init__(self):
        if not self.radius >= 0:
            raise DomainError(f"ball radius must be non-negative, got {self.radius}")


def input_support(par: InputParameterization, pm: ParameterModel, where) -> SupportInterval:
    """Conservative support ``u(.; a_bar) +- sqrt(n) L rho_a`` of an input law.

    ``where`` is ``("initial", x)`` or ``("boundary", x, t)``.
    """
    kind = where[0]
    if kind == "initial":
        x = where[1]
        center, lip = par.u0(x, pm.a_bar), par.L0(x)
    elif kind == "boundary":
        x, t = where[1], where[2]
        center, lip = par.ub(x, t, pm.a_bar), par.Lb(x, t)
    else:
        raise DomainError(f"unknown input location {where!r}")
    half = math.sqrt(pm.n) * float(lip) * pm.rho_a
    return SupportInterval(float(center) - half, float(center) + half)


def build_input_ball(samples, support: SupportInterval, L: float, eps: float) -> AmbiguityBall:
    if eps < 0 or L < 0:
        raise DomainError("L and eps must be non-negative")
    center = from_samples(samples, support)
    return AmbiguityBall(center, float(L) * float(eps), support)
